// SPDX-License-Identifier: Apache-2.0
//
// Toy training, session-level restoration and the fused-vs-unfused benchmark.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "drnet/data.hpp"
#include "drnet/metrics.hpp"
#include "drnet/model.hpp"

namespace drnet {

struct TrainConfig {
    int64_t crop = 32;
    int64_t batch = 4;
    int64_t steps = 2000;
    double lr = 2e-4;
    double lr_min = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    bool flip = true;
    bool rot90 = true;
    uint64_t seed = 0;

    /// Throws ContractError listing every invalid field.
    void validate() const;
};

/// Keys mirror the field names. Unknown keys are an error unless `ignore_unknown`.
TrainConfig parse_train_config(const std::string& text, bool ignore_unknown = false);

/// Cosine annealing from `lr` at step 0 to `lr_min` at step `steps - 1`.
double cosine_lr(int64_t step, int64_t steps, double lr, double lr_min);

class Adam {
   public:
    Adam(std::vector<Tensor> params, double beta1, double beta2, double eps);
    /// Consumes the gradients of all parameters; parameters without a gradient are skipped.
    void step(double lr);
    int64_t steps_taken() const { return t_; }

   private:
    std::vector<Tensor> params_;
    std::vector<std::vector<float>> m_, v_;
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

struct TrainStep {
    int64_t step = 0;
    std::string task;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<TrainStep> trace;
    /// Mean loss over trace[first, first + count).
    double mean_loss(size_t first, size_t count) const;
};

using TrainObserver = std::function<void(const TrainStep&)>;

/// Each step samples a task uniformly from `tasks`, synthesizes a batch of
/// augmented crops, degrades them ("blind" draws a random concrete degradation
/// per item), and takes one Adam step on the mean l1 loss.
/// Throws DivergenceError on a non-finite loss; parameters are then left at
/// their last finite values.
TrainResult train(DRNet& model, const TrainConfig& config, std::span<const std::string> tasks,
                  const TrainObserver& observer = {});

/// Fused inference clamped to [0, 1].
Tensor restore(const FusedDRNet& model, const Tensor& image);

/// Fuses for each task in order and feeds each output into the next step.
Tensor sequential_restore(const DRNet& model, const Tensor& image, std::span<const std::string> tasks);

/// Restores every degraded image of `set` and scores it against the clean one.
MetricsReport evaluate(const FusedDRNet& model, const TestSet& set);
/// Scores the degraded inputs themselves.
MetricsReport evaluate_inputs(const TestSet& set);

/// max_i |a_i - b_i| / (|b_i| + 1e-8). Blows up on outputs near zero.
double max_relative_error(const Tensor& a, const Tensor& b);
/// max_i |a_i - b_i| / max_i |b_i|: deviation relative to the output's scale.
double tensor_relative_error(const Tensor& a, const Tensor& b);

struct BenchReport {
    std::string task;
    int64_t height = 0;
    int64_t width = 0;
    int reps = 0;
    double init_ms = 0.0;
    double fused_ms = 0.0;
    double unfused_ms = 0.0;
    FlopEstimate fused_cost;
    FlopEstimate unfused_cost;
    /// Ops and multiply-accumulates counted while running one image.
    OpStats fused_counted;
    OpStats unfused_counted;
    /// tensor_relative_error(unfused, fused); equal_output compares it to kEqualOutputTolerance.
    double rel_error = 0.0;
    double elementwise_rel_error = 0.0;
    bool equal_output = false;

    double flop_ratio() const;
    /// `key value` lines.
    std::string to_text() const;
};

inline constexpr double kEqualOutputTolerance = 1e-4;

/// Medians over `reps` timed runs after one warm-up of each path. reps >= 3.
BenchReport bench(const DRNet& model, std::string_view task, int64_t height, int64_t width, int reps,
                  uint64_t seed = 0);

}  // namespace drnet
