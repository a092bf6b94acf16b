// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "drnet/tensor.hpp"

namespace drnet {

struct FiniteDiffOptions {
    double eps = 1e-3;
    /// Entries probed per input; 0 means all of them. Subsets are drawn with `seed`.
    int64_t max_entries_per_input = 0;
    uint64_t seed = 0;
};

using ScalarFn = std::function<Tensor(std::span<const Tensor>)>;

/// Central-difference check of a scalar-valued function.
///
/// Returns max over probed entries of |analytic - numeric| / max(1, |numeric|).
/// The inputs are modified in place while probing and restored afterwards.
double finite_diff_check(const ScalarFn& f, std::vector<Tensor> inputs, const FiniteDiffOptions& options = {});

}  // namespace drnet
