// SPDX-License-Identifier: Apache-2.0
//
// Differentiable forward ops. Every op records its adjoint on the active tape
// when at least one input requires a gradient. Reductions accumulate in double.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "drnet/tensor.hpp"

namespace drnet {

inline constexpr float kLayerNormEps = 1e-5f;

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float factor);
/// out[i] = x[src_index[i]]. Indices may repeat; the adjoint scatter-adds.
Tensor gather(const Tensor& x, Shape out_shape, std::vector<int64_t> src_index);
/// Same data under a new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

/// y[..., o] = sum_i W[o, i] x[..., i] + b[o]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// "Same"-padded stride-1 convolution of x[C_in, H, W] with k[C_out, C_in, s, s], s odd.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

/// Normalizes each last-axis slice, then gamma * x_hat + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = kLayerNormEps);

/// Max-subtracted softmax over the last axis.
Tensor softmax(const Tensor& x);

/// Exact erf form: x * Phi(x).
Tensor gelu(const Tensor& x);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// mean |pred - target|. The subgradient at a zero residual is 0.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

/// sum_j weights[j] * terms[j]; differentiable in both the terms and the weights.
Tensor weighted_sum(std::span<const Tensor> terms, const Tensor& weights);

/// Concatenation along axis 0 of tensors with equal trailing extents.
Tensor concat0(const Tensor& a, const Tensor& b);

/// [C, H, W] -> [H, W, C]
Tensor to_channels_last(const Tensor& x);
/// [H, W, C] -> [C, H, W]
Tensor to_channels_first(const Tensor& x);

/// Cyclic shift of x[H, W, C]: out[(y + dy) mod H, (x + dx) mod W] = in[y, x].
Tensor roll2d(const Tensor& x, int64_t dy, int64_t dx);

/// Reflect-pads x[C, H, W] on the bottom and right edges.
Tensor reflect_pad(const Tensor& x, int64_t pad_bottom, int64_t pad_right);
/// Top-left crop of x[C, H, W].
Tensor crop(const Tensor& x, int64_t height, int64_t width);

namespace detail {
/// Deterministic four-lane double accumulation.
double dot(const float* a, const float* b, int64_t n);
}  // namespace detail

}  // namespace drnet
