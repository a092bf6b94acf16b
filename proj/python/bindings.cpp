// SPDX-License-Identifier: Apache-2.0

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "drnet/checkpoint.hpp"
#include "drnet/data.hpp"
#include "drnet/metrics.hpp"
#include "drnet/pipeline.hpp"
#include "drnet/wavelet.hpp"

namespace py = pybind11;
using namespace drnet;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Tensor& t) {
    FloatArray out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

Mode parse_mode(const std::string& mode) {
    if (mode == "train") return Mode::kTrain;
    if (mode == "fused") return Mode::kFused;
    throw py::value_error("mode must be 'train' or 'fused'");
}

}  // namespace

PYBIND11_MODULE(_drnet, m) {
    m.doc() = "Degradation-aware restoration network with reparameterizable MLP banks.";

    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

    m.attr("TASKS") = std::vector<std::string>(kTaskNames.begin(), kTaskNames.end());

    py::class_<DRNetConfig>(m, "Config")
        .def(py::init<>())
        .def_static("tiny", &DRNetConfig::tiny)
        .def_static("parse", [](const std::string& text) { return parse_model_config(text); })
        .def_readwrite("base_channels", &DRNetConfig::base_channels)
        .def_readwrite("deep_channels", &DRNetConfig::deep_channels)
        .def_readwrite("window", &DRNetConfig::window)
        .def_readwrite("bank1_size", &DRNetConfig::bank1_size)
        .def_readwrite("bank2_size", &DRNetConfig::bank2_size)
        .def("validate", &DRNetConfig::validate)
        .def("canonical", &DRNetConfig::canonical)
        .def_property_readonly("size_multiple", &DRNetConfig::size_multiple)
        .def("__repr__", [](const DRNetConfig& c) { return "Config(" + c.canonical() + ")"; });

    py::class_<FusedDRNet>(m, "FusedModel")
        .def_static("load", &load_fused, py::arg("path"))
        .def("save", [](const FusedDRNet& f, const std::filesystem::path& p) { save(f, p); }, py::arg("path"))
        .def("forward", [](const FusedDRNet& f, const FloatArray& x) { return to_array(forward_fused(f, to_tensor(x))); },
             py::arg("image"), "Raw fused forward pass on a [C, H, W] float32 image.")
        .def("restore", [](const FusedDRNet& f, const FloatArray& x) { return to_array(restore(f, to_tensor(x))); },
             py::arg("image"), "Fused inference with any padding and clamping to [0, 1].")
        .def_property_readonly("num_params", [](const FusedDRNet& f) { return count_params(f); });

    py::class_<DRNet>(m, "Model")
        .def(py::init([](const DRNetConfig& c, uint64_t seed) { return build(c, seed); }), py::arg("config"),
             py::arg("seed") = 0)
        .def_static("load", &load_train, py::arg("path"))
        .def("save", [](const DRNet& d, const std::filesystem::path& p) { save(d, p); }, py::arg("path"))
        .def(
            "forward",
            [](const DRNet& d, const FloatArray& x, const std::string& task) {
                return to_array(forward_train(d, to_tensor(x), TaskPrior::for_task(task)));
            },
            py::arg("image"), py::arg("task"), "Multi-branch forward pass under a task prior.")
        .def("fuse", [](const DRNet& d, const std::string& task) { return reconfigure(d, TaskPrior::for_task(task)); },
             py::arg("task"))
        .def(
            "restore_sequential",
            [](const DRNet& d, const FloatArray& x, const std::vector<std::string>& tasks) {
                return to_array(sequential_restore(d, to_tensor(x), tasks));
            },
            py::arg("image"), py::arg("tasks"))
        .def(
            "train",
            [](DRNet& d, const std::vector<std::string>& tasks, int64_t steps, double lr, uint64_t seed) {
                TrainConfig tc;
                tc.steps = steps;
                tc.lr = lr;
                tc.seed = seed;
                TrainResult r;
                {
                    py::gil_scoped_release release;
                    r = train(d, tc, tasks);
                }
                std::vector<double> losses;
                for (const TrainStep& s : r.trace) losses.push_back(s.loss);
                return losses;
            },
            py::arg("tasks"), py::arg("steps"), py::arg("lr") = 2e-4, py::arg("seed") = 0,
            "Trains in place and returns the per-step losses.")
        .def_property_readonly("config", [](const DRNet& d) { return d.config(); })
        .def("num_params", [](const DRNet& d, const std::string& mode) { return count_params(d, parse_mode(mode)); },
             py::arg("mode") = "train");

    m.def("haar_decompose", [](const FloatArray& x) {
        SubBands b = haar_decompose(to_tensor(x));
        return py::make_tuple(to_array(b.ll), to_array(b.lh), to_array(b.hl), to_array(b.hh));
    });
    m.def(
        "haar_reconstruct",
        [](const FloatArray& ll, const FloatArray& lh, const FloatArray& hl, const FloatArray& hh) {
            return to_array(haar_reconstruct({to_tensor(ll), to_tensor(lh), to_tensor(hl), to_tensor(hh)}));
        },
        py::arg("ll"), py::arg("lh"), py::arg("hl"), py::arg("hh"));
    m.def("psnr", [](const FloatArray& a, const FloatArray& b) { return psnr(to_tensor(a), to_tensor(b)); });
    m.def("ssim", [](const FloatArray& a, const FloatArray& b) { return ssim(to_tensor(a), to_tensor(b)); });
    m.def("synth_clean", [](uint64_t seed, int64_t h, int64_t w) { return to_array(synth_clean(seed, h, w)); },
          py::arg("seed"), py::arg("height"), py::arg("width"));
    m.def(
        "degrade", [](const FloatArray& x, const std::string& task, uint64_t seed) {
            return to_array(degrade(to_tensor(x), task, seed));
        },
        py::arg("image"), py::arg("task"), py::arg("seed") = 0);
    m.def("count_params", [](const DRNetConfig& c, const std::string& mode) { return count_params(c, parse_mode(mode)); },
          py::arg("config"), py::arg("mode") = "train");
    m.def(
        "estimate_macs",
        [](const DRNetConfig& c, int64_t h, int64_t w, const std::string& mode) {
            return estimate_flops(c, h, w, parse_mode(mode)).macs;
        },
        py::arg("config"), py::arg("height"), py::arg("width"), py::arg("mode") = "train");
    m.def(
        "bench",
        [](const DRNet& d, const std::string& task, int64_t h, int64_t w, int reps, uint64_t seed) {
            const BenchReport r = bench(d, task, h, w, reps, seed);
            py::dict out;
            out["fused_ms"] = r.fused_ms;
            out["unfused_ms"] = r.unfused_ms;
            out["fused_flops"] = r.fused_cost.flops();
            out["unfused_flops"] = r.unfused_cost.flops();
            out["flop_ratio"] = r.flop_ratio();
            out["rel_error"] = r.rel_error;
            out["equal_output"] = r.equal_output;
            return out;
        },
        py::arg("model"), py::arg("task"), py::arg("height") = 64, py::arg("width") = 64, py::arg("reps") = 3,
        py::arg("seed") = 0);
}
