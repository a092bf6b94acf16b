// SPDX-License-Identifier: Apache-2.0
//
// Task registry, procedural clean images and the degradation synthesizer.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "drnet/drmlp.hpp"
#include "drnet/init.hpp"
#include "drnet/tensor.hpp"

namespace drnet {

struct TaskSpec {
    std::string name;
    TaskPrior prior;
};

/// Throws ContractError for names outside kTaskNames.
TaskSpec task_spec(std::string_view name);
/// The five concrete degradations (everything but "blind").
std::vector<std::string> specific_tasks();
/// Parses "a,b,c"; every entry must name a task.
std::vector<std::string> parse_task_list(std::string_view text);

/// One concrete degradation with its sampled parameters. Defaults are identities.
struct Degradation {
    std::string kind;      // one of specific_tasks()
    double sigma = 0.0;    // denoise: noise std in [0, 1] units
    int rain_lines = 0;    // derain
    double transmission = 1.0;  // dehaze t
    double airlight = 1.0;      // dehaze A
    int kernel = 1;        // deblur box size
    double gamma = 1.0;    // enhance: y = gain * x^gamma
    double gain = 1.0;
};

/// Samples parameters for `task`; "blind" first picks one of the five uniformly.
Degradation sample_degradation(std::string_view task, Rng& rng);
/// Applies `d` to x[C, H, W] in [0, 1]. Noise and rain geometry draw from rng.
/// The result is clamped to [0, 1].
Tensor apply_degradation(const Tensor& x, const Degradation& d, Rng& rng);
Tensor degrade(const Tensor& x, std::string_view task, uint64_t seed);

/// Deterministic procedural scene [3, H, W] in [0, 1]: a colour gradient with
/// rectangles, disks and a checkerboard patch.
Tensor synth_clean(uint64_t seed, int64_t height, int64_t width);

/// Clean/degraded pairs drawn for one task.
struct TestSet {
    std::string task;
    std::vector<Tensor> clean;
    std::vector<Tensor> degraded;
};
TestSet make_test_set(std::string_view task, int count, int64_t size, uint64_t seed);

}  // namespace drnet
