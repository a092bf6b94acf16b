// SPDX-License-Identifier: Apache-2.0
//
// drnet: command-line front end for building, training, fusing and running
// task-modulated restoration networks.
//
// Exit codes: 0 success, 2 usage error, 3 data or format error, 4 divergence.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "drnet/checkpoint.hpp"
#include "drnet/image.hpp"
#include "drnet/pipeline.hpp"

namespace {

using namespace drnet;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

class UsageError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct InitArgs {
    std::string config;
    uint64_t seed = 0;
    std::string out;
};

int run_init(const InitArgs& a) {
    const DRNetConfig config = a.config.empty() ? DRNetConfig{} : parse_model_config(read_text(a.config), true);
    const DRNet model = build(config, a.seed);
    save(model, a.out);
    std::cout << "wrote " << a.out << " (" << count_params(model, Mode::kTrain) << " train parameters, "
              << count_params(model, Mode::kFused) << " after fusion)\n";
    return 0;
}

struct TrainArgs {
    std::string ckpt;
    std::string tasks;
    int64_t steps = -1;
    std::string config;
    int64_t seed = -1;
    int64_t log_every = 100;
    std::string out;
};

int run_train(const TrainArgs& a) {
    TrainConfig tc = a.config.empty() ? TrainConfig{} : parse_train_config(read_text(a.config), true);
    if (a.steps >= 0) tc.steps = a.steps;
    if (a.seed >= 0) tc.seed = static_cast<uint64_t>(a.seed);
    tc.validate();
    const std::vector<std::string> tasks = parse_task_list(a.tasks);
    DRNet model = load_train(a.ckpt);
    const TrainResult r = train(model, tc, tasks, [&](const TrainStep& s) {
        if (a.log_every > 0 && (s.step % a.log_every == 0 || s.step + 1 == tc.steps)) {
            std::cout << "step " << s.step << " task " << s.task << " loss " << std::setprecision(5) << s.loss
                      << " lr " << std::setprecision(3) << s.lr << '\n'
                      << std::flush;
        }
    });
    save(model, a.out);
    const size_t n = r.trace.size(), window = std::min<size_t>(100, n);
    if (n > 0) {
        std::cout << "mean loss first " << window << ": " << r.mean_loss(0, window) << ", last " << window << ": "
                  << r.mean_loss(n - window, window) << '\n';
    }
    std::cout << "wrote " << a.out << '\n';
    return 0;
}

struct FuseArgs {
    std::string ckpt;
    std::string task;
    std::string out;
};

int run_fuse(const FuseArgs& a) {
    const DRNet model = load_train(a.ckpt);
    const FusedDRNet fused = reconfigure(model, TaskPrior::for_task(a.task, model.config().num_tasks));
    save(fused, a.out);
    std::cout << "wrote " << a.out << " (" << count_params(fused) << " parameters, task " << a.task << ")\n";
    return 0;
}

struct RestoreArgs {
    std::string ckpt;
    std::string input;
    std::string output;
    std::string tasks;
};

int run_restore(const RestoreArgs& a) {
    const Tensor image = read_image(a.input);
    const Tensor rgb = to_rgb(image);
    Tensor out;
    if (a.tasks.empty()) {
        out = restore(load_fused(a.ckpt), rgb);
    } else {
        out = sequential_restore(load_train(a.ckpt), rgb, parse_task_list(a.tasks));
    }
    write_image(image.dim(0) == 1 ? to_gray(out) : out, a.output);
    return 0;
}

struct BenchArgs {
    std::string ckpt;
    std::string task;
    int64_t size = 128;
    int reps = 10;
};

int run_bench(const BenchArgs& a) {
    if (a.size <= 0) throw UsageError("--size must be positive");
    if (a.reps < 3) throw UsageError("--reps must be at least 3");
    const DRNet model = load_train(a.ckpt);
    const BenchReport r = bench(model, a.task, a.size, a.size, a.reps);
    std::cout << r.to_text();
    return 0;
}

struct InspectArgs {
    std::string ckpt;
    bool similarity = false;
    int bank = 1;
    int block = -1;
};

void print_similarity(const SimilarityMatrix& m, int num_tasks) {
    auto label = [&](int i) {
        return i < static_cast<int>(kTaskNames.size()) && num_tasks == kNumTasks ? std::string(kTaskNames[static_cast<size_t>(i)])
                                                                                 : "slot" + std::to_string(i);
    };
    constexpr int kWidth = 9;
    std::cout << std::setw(kWidth) << "";
    for (int j = 0; j < m.size; ++j) std::cout << ' ' << std::setw(kWidth) << label(j);
    std::cout << '\n';
    for (int i = 0; i < m.size; ++i) {
        std::cout << std::setw(kWidth) << label(i);
        for (int j = 0; j < m.size; ++j) {
            std::ostringstream cell;
            if (m.flagged[static_cast<size_t>(i * m.size + j)]) {
                cell << "zero-norm";
            } else {
                cell << std::fixed << std::setprecision(6) << m.at(i, j);
            }
            std::cout << ' ' << std::setw(kWidth) << cell.str();
        }
        std::cout << '\n';
    }
}

int run_inspect(const InspectArgs& a) {
    const AnyModel any = load(a.ckpt);
    if (const auto* fused = std::get_if<FusedDRNet>(&any)) {
        if (a.similarity) throw FormatError("similarity needs a train-mode checkpoint; '" + a.ckpt + "' is fused");
        std::cout << "mode fused" << (fused->task_name.empty() ? "" : ":" + fused->task_name) << '\n'
                  << "config " << fused->config().canonical() << '\n'
                  << "params " << count_params(*fused) << '\n';
        return 0;
    }
    const DRNet& model = std::get<DRNet>(any);
    if (a.similarity) {
        if (a.bank != 1 && a.bank != 2) throw UsageError("--bank must be 1 or 2");
        if (a.block < -1 || a.block >= static_cast<int>(model.mlps.size())) {
            throw UsageError("--block out of range (model has " + std::to_string(model.mlps.size()) + " blocks)");
        }
        print_similarity(fused_weight_similarity(model, a.bank, a.block), model.config().num_tasks);
        return 0;
    }
    const DRNetConfig& c = model.config();
    std::cout << "mode train\n"
              << "config " << c.canonical() << '\n'
              << "blocks " << model.mlps.size() << '\n'
              << "params_train " << count_params(model, Mode::kTrain) << '\n'
              << "params_fused " << count_params(model, Mode::kFused) << '\n'
              << "flops_train_128 " << estimate_flops(c, 128, 128, Mode::kTrain).flops() << '\n'
              << "flops_fused_128 " << estimate_flops(c, 128, 128, Mode::kFused).flops() << '\n';
    return 0;
}

struct MetricsArgs {
    std::string ref;
    std::string test;
};

int run_metrics(const MetricsArgs& a) {
    const Tensor ref = read_image(a.ref);
    const Tensor test = read_image(a.test);
    if (ref.shape() != test.shape()) {
        throw FormatError("images differ in shape: " + shape_str(ref.shape()) + " vs " + shape_str(test.shape()));
    }
    std::cout << std::fixed << std::setprecision(4) << "psnr " << psnr(test, ref) << '\n'
              << "ssim " << ssim(test, ref) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drnet: task-modulated restoration with one-time branch fusion"};
    app.require_subcommand(1);

    InitArgs init_args;
    auto* init = app.add_subcommand("init", "Build a freshly initialized train-mode checkpoint");
    init->add_option("--config", init_args.config, "Model config file (key = value); defaults when omitted");
    init->add_option("--seed", init_args.seed, "Initialization seed");
    init->add_option("--out", init_args.out, "Output checkpoint")->required();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Toy training on synthetic degradations");
    train_cmd->add_option("--ckpt", train_args.ckpt, "Train-mode checkpoint")->required();
    train_cmd->add_option("--tasks", train_args.tasks, "Comma-separated task names")->required();
    train_cmd->add_option("--steps", train_args.steps, "Optimizer steps (overrides the config)");
    train_cmd->add_option("--config", train_args.config, "Training config file (key = value)");
    train_cmd->add_option("--seed", train_args.seed, "Data and sampling seed (overrides the config)");
    train_cmd->add_option("--log-every", train_args.log_every, "Print every N steps; 0 disables");
    train_cmd->add_option("--out", train_args.out, "Output checkpoint")->required();

    FuseArgs fuse_args;
    auto* fuse = app.add_subcommand("fuse", "Collapse every branch bank for one task");
    fuse->add_option("--ckpt", fuse_args.ckpt, "Train-mode checkpoint")->required();
    fuse->add_option("--task", fuse_args.task, "Task name")->required();
    fuse->add_option("--out", fuse_args.out, "Output fused checkpoint")->required();

    RestoreArgs restore_args;
    auto* restore_cmd = app.add_subcommand("restore", "Restore a PPM/PGM image");
    restore_cmd->add_option("--ckpt", restore_args.ckpt, "Fused checkpoint, or train-mode with --tasks")->required();
    restore_cmd->add_option("--input", restore_args.input, "Input image")->required();
    restore_cmd->add_option("--output", restore_args.output, "Output image")->required();
    restore_cmd->add_option("--tasks", restore_args.tasks, "Sequential mode: ordered comma-separated tasks");

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Time fused against unfused inference");
    bench_cmd->add_option("--ckpt", bench_args.ckpt, "Train-mode checkpoint")->required();
    bench_cmd->add_option("--task", bench_args.task, "Task name")->required();
    bench_cmd->add_option("--size", bench_args.size, "Square input extent");
    bench_cmd->add_option("--reps", bench_args.reps, "Timed repetitions (>= 3)");

    InspectArgs inspect_args;
    auto* inspect = app.add_subcommand("inspect", "Summarize a checkpoint");
    inspect->add_option("--ckpt", inspect_args.ckpt, "Checkpoint")->required();
    inspect->add_flag("--similarity", inspect_args.similarity, "Print the cosine similarity of fused weights");
    inspect->add_option("--bank", inspect_args.bank, "Bank for --similarity (1 or 2)");
    inspect->add_option("--block", inspect_args.block, "Single block for --similarity; -1 for all");

    MetricsArgs metrics_args;
    auto* metrics = app.add_subcommand("metrics", "PSNR and SSIM of a test image against a reference");
    metrics->add_option("--ref", metrics_args.ref, "Reference image")->required();
    metrics->add_option("--test", metrics_args.test, "Test image")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (*init) return run_init(init_args);
        if (*train_cmd) return run_train(train_args);
        if (*fuse) return run_fuse(fuse_args);
        if (*restore_cmd) return run_restore(restore_args);
        if (*bench_cmd) return run_bench(bench_args);
        if (*inspect) return run_inspect(inspect_args);
        if (*metrics) return run_metrics(metrics_args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
