// SPDX-License-Identifier: Apache-2.0

#include "drnet/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "drnet/kv.hpp"
#include "drnet/ops.hpp"

namespace drnet {

namespace {

// Horizontal flip and/or k quarter turns of a square [C, S, S] image.
Tensor augment(const Tensor& x, bool flip, int quarter_turns) {
    const int64_t c = x.dim(0), s = x.dim(1);
    Tensor out(x.shape());
    auto src = x.data();
    auto dst = out.mutable_data();
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t y = 0; y < s; ++y) {
            for (int64_t xx = 0; xx < s; ++xx) {
                int64_t sy = y, sx = flip ? s - 1 - xx : xx;
                for (int k = 0; k < quarter_turns; ++k) {
                    const int64_t t = sy;
                    sy = sx;
                    sx = s - 1 - t;
                }
                dst[static_cast<size_t>((ch * s + y) * s + xx)] = src[static_cast<size_t>((ch * s + sy) * s + sx)];
            }
        }
    }
    return out;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class F>
double time_ms(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Tensor clamp_unit(const Tensor& x) {
    Tensor out = x.detach();
    for (float& v : out.mutable_data()) v = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    std::vector<std::string> problems;
    if (crop <= 0) problems.push_back("crop must be positive");
    if (batch <= 0) problems.push_back("batch must be positive");
    if (steps < 0) problems.push_back("steps must be non-negative");
    if (!(lr > 0)) problems.push_back("lr must be positive");
    if (!(lr_min >= 0 && lr_min <= lr)) problems.push_back("lr_min must lie in [0, lr]");
    if (!(beta1 >= 0 && beta1 < 1)) problems.push_back("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0 && beta2 < 1)) problems.push_back("beta2 must lie in [0, 1)");
    if (!(adam_eps > 0)) problems.push_back("adam_eps must be positive");
    if (problems.empty()) return;
    std::string msg = "invalid training config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ContractError(msg);
}

TrainConfig parse_train_config(const std::string& text, bool ignore_unknown) {
    TrainConfig c;
    for (const auto& [key, value] : parse_key_values(text)) {
        if (key == "crop") c.crop = parse_int(key, value);
        else if (key == "batch") c.batch = parse_int(key, value);
        else if (key == "steps") c.steps = parse_int(key, value);
        else if (key == "lr") c.lr = parse_double(key, value);
        else if (key == "lr_min") c.lr_min = parse_double(key, value);
        else if (key == "beta1") c.beta1 = parse_double(key, value);
        else if (key == "beta2") c.beta2 = parse_double(key, value);
        else if (key == "adam_eps") c.adam_eps = parse_double(key, value);
        else if (key == "flip") c.flip = parse_bool(key, value);
        else if (key == "rot90") c.rot90 = parse_bool(key, value);
        else if (key == "seed") c.seed = static_cast<uint64_t>(parse_int(key, value));
        else if (!ignore_unknown) throw FormatError("unknown training key '" + key + "'");
    }
    c.validate();
    return c;
}

double cosine_lr(int64_t step, int64_t steps, double lr, double lr_min) {
    if (steps <= 1) return lr;
    const double progress = static_cast<double>(std::clamp<int64_t>(step, 0, steps - 1)) / static_cast<double>(steps - 1);
    return lr_min + 0.5 * (lr - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Tensor& p : params_) {
        m_.emplace_back(static_cast<size_t>(p.numel()), 0.0f);
        v_.emplace_back(static_cast<size_t>(p.numel()), 0.0f);
    }
}

void Adam::step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = params_[k];
        if (!p.has_grad()) continue;
        auto g = p.grad();
        auto w = p.mutable_data();
        auto& m = m_[k];
        auto& v = v_[k];
        for (size_t i = 0; i < w.size(); ++i) {
            const double gi = g[i];
            m[i] = static_cast<float>(beta1_ * m[i] + (1.0 - beta1_) * gi);
            v[i] = static_cast<float>(beta2_ * v[i] + (1.0 - beta2_) * gi * gi);
            const double mh = m[i] / c1, vh = v[i] / c2;
            w[i] = static_cast<float>(w[i] - lr * mh / (std::sqrt(vh) + eps_));
        }
        p.zero_grad();
    }
}

double TrainResult::mean_loss(size_t first, size_t count) const {
    const size_t end = std::min(trace.size(), first + count);
    if (first >= end) return 0.0;
    double s = 0.0;
    for (size_t i = first; i < end; ++i) s += trace[i].loss;
    return s / static_cast<double>(end - first);
}

TrainResult train(DRNet& model, const TrainConfig& config, std::span<const std::string> tasks,
                  const TrainObserver& observer) {
    config.validate();
    if (tasks.empty()) throw ContractError("train: task list is empty");
    for (const auto& t : tasks) task_index(t);

    TrainResult result;
    if (config.steps == 0) return result;

    std::vector<Tensor> params = parameters(model);
    for (Tensor& p : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }
    Adam adam(params, config.beta1, config.beta2, config.adam_eps);
    Rng rng(config.seed);
    std::uniform_int_distribution<size_t> pick_task(0, tasks.size() - 1);
    std::uniform_int_distribution<int> pick_turns(0, 3);
    std::bernoulli_distribution coin(0.5);
    Tape tape;

    auto release = [&] {
        for (Tensor& p : params) {
            p.zero_grad();
            p.set_requires_grad(false);
        }
    };

    for (int64_t step = 0; step < config.steps; ++step) {
        const std::string& task = tasks[pick_task(rng)];
        const TaskPrior prior = TaskPrior::for_task(task, model.config().num_tasks);
        tape.reset();
        Tensor loss;
        {
            TapeScope scope(tape);
            for (int64_t b = 0; b < config.batch; ++b) {
                Tensor clean = synth_clean(rng(), config.crop, config.crop);
                const bool flip = config.flip && coin(rng);
                const int turns = config.rot90 ? pick_turns(rng) : 0;
                if (flip || turns) clean = augment(clean, flip, turns);
                const Tensor degraded = degrade(clean, task, rng());
                Tensor item = l1_loss(forward_train(model, degraded, prior), clean);
                loss = loss.defined() ? add(loss, item) : item;
            }
            loss = scale(loss, 1.0f / static_cast<float>(config.batch));
        }
        const double value = loss.item();
        if (!std::isfinite(value)) {
            release();
            throw DivergenceError("training diverged at step " + std::to_string(step) + " (loss " +
                                  std::to_string(value) + ")");
        }
        tape.backward(loss);
        const double lr = cosine_lr(step, config.steps, config.lr, config.lr_min);
        adam.step(lr);
        TrainStep rec{step, task, value, lr};
        result.trace.push_back(rec);
        if (observer) observer(rec);
    }
    tape.reset();
    release();
    return result;
}

Tensor restore(const FusedDRNet& model, const Tensor& image) { return clamp_unit(forward_fused(model, image)); }

Tensor sequential_restore(const DRNet& model, const Tensor& image, std::span<const std::string> tasks) {
    if (tasks.empty()) throw ContractError("sequential_restore: task list is empty");
    Tensor current = image;
    for (const std::string& task : tasks) {
        const FusedDRNet fused = reconfigure(model, TaskPrior::for_task(task, model.config().num_tasks));
        current = restore(fused, current);
    }
    return current;
}

MetricsReport evaluate(const FusedDRNet& model, const TestSet& set) {
    MetricsReport r;
    for (size_t i = 0; i < set.clean.size(); ++i) r.add(restore(model, set.degraded[i]), set.clean[i]);
    return r;
}

MetricsReport evaluate_inputs(const TestSet& set) {
    MetricsReport r;
    for (size_t i = 0; i < set.clean.size(); ++i) r.add(set.degraded[i], set.clean[i]);
    return r;
}

double max_relative_error(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("max_relative_error: shapes differ, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    double worst = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i]));
        worst = std::max(worst, d / (std::abs(static_cast<double>(y[i])) + 1e-8));
    }
    return worst;
}

double tensor_relative_error(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("tensor_relative_error: shapes differ, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    double diff = 0.0, scale = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (size_t i = 0; i < x.size(); ++i) {
        diff = std::max(diff, std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i])));
        scale = std::max(scale, std::abs(static_cast<double>(y[i])));
    }
    if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / scale;
}

double BenchReport::flop_ratio() const {
    return unfused_cost.macs ? static_cast<double>(fused_cost.macs) / static_cast<double>(unfused_cost.macs) : 0.0;
}

std::string BenchReport::to_text() const {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "task " << task << '\n'
       << "size " << height << 'x' << width << '\n'
       << "reps " << reps << '\n'
       << "init_ms " << init_ms << '\n'
       << "fused_ms " << fused_ms << '\n'
       << "unfused_ms " << unfused_ms << '\n'
       << "fused_flops " << fused_cost.flops() << '\n'
       << "unfused_flops " << unfused_cost.flops() << '\n'
       << "fused_macs " << fused_cost.macs << '\n'
       << "unfused_macs " << unfused_cost.macs << '\n'
       << "flop_ratio " << flop_ratio() << '\n'
       << "fused_counted_ops " << fused_counted.ops << '\n'
       << "fused_counted_macs " << fused_counted.macs << '\n'
       << "unfused_counted_ops " << unfused_counted.ops << '\n'
       << "unfused_counted_macs " << unfused_counted.macs << '\n';
    os.unsetf(std::ios::fixed);
    os.precision(3);
    os << "rel_error " << rel_error << '\n'
       << "elementwise_rel_error " << elementwise_rel_error << '\n'
       << "equal_output " << (equal_output ? "true" : "false") << '\n';
    return os.str();
}

BenchReport bench(const DRNet& model, std::string_view task, int64_t height, int64_t width, int reps,
                  uint64_t seed) {
    if (reps < 3) throw ContractError("bench: reps must be at least 3");
    const TaskPrior prior = TaskPrior::for_task(task, model.config().num_tasks);
    const Tensor input = degrade(synth_clean(seed, height, width), task, seed + 1);

    BenchReport r;
    r.task = std::string(task);
    r.height = height;
    r.width = width;
    r.reps = reps;
    FusedDRNet fused;
    r.init_ms = time_ms([&] { fused = reconfigure(model, prior); });
    r.fused_cost = estimate_flops(model.config(), height, width, Mode::kFused);
    r.unfused_cost = estimate_flops(model.config(), height, width, Mode::kTrain);

    Tensor out_fused, out_unfused;
    {
        OpCounter counter;
        out_fused = forward_fused(fused, input);
        r.fused_counted = counter.stats();
    }
    {
        OpCounter counter;
        out_unfused = forward_train(model, input, prior);
        r.unfused_counted = counter.stats();
    }
    std::vector<double> tf, tu;
    for (int i = 0; i < reps; ++i) {
        tf.push_back(time_ms([&] { forward_fused(fused, input); }));
        tu.push_back(time_ms([&] { forward_train(model, input, prior); }));
    }
    r.fused_ms = median(tf);
    r.unfused_ms = median(tu);
    r.rel_error = tensor_relative_error(out_unfused, out_fused);
    r.elementwise_rel_error = max_relative_error(out_unfused, out_fused);
    r.equal_output = r.rel_error <= kEqualOutputTolerance;
    return r;
}

}  // namespace drnet
