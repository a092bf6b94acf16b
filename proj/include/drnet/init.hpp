// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <random>

#include "drnet/tensor.hpp"

namespace drnet {

using Rng = std::mt19937_64;

inline Tensor uniform(Shape shape, float bound, Rng& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (float& v : t.mutable_data()) v = dist(rng);
    return t;
}

/// Uniform in +-1/sqrt(fan_in).
inline Tensor fan_in_uniform(Shape shape, int64_t fan_in, Rng& rng) {
    return uniform(std::move(shape), 1.0f / std::sqrt(static_cast<float>(fan_in)), rng);
}

}  // namespace drnet
