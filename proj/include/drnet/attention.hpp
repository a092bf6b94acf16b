// SPDX-License-Identifier: Apache-2.0
//
// Shifted-window multi-head self-attention over channels-last maps [H, W, C].

#pragma once

#include <cstdint>
#include <vector>

#include "drnet/init.hpp"
#include "drnet/tensor.hpp"

namespace drnet {

/// Logit added to attention pairs that straddle a cyclic-shift seam.
inline constexpr float kMaskSentinel = -100.0f;

struct AttentionParams {
    Tensor qkv_weight;      // [3C, C], rows ordered q | k | v
    Tensor qkv_bias;        // [3C]
    Tensor proj_weight;     // [C, C]
    Tensor proj_bias;       // [C]
    Tensor rel_bias_table;  // [heads, (2w - 1)^2]
    int heads = 1;
    int window = 1;

    int64_t channels() const { return proj_weight.dim(0); }
};

struct ShiftConfig {
    int shift = 0;
};

/// Fan-in uniform projections, zero biases, zero relative-position table.
AttentionParams make_attention_params(int64_t channels, int heads, int window, Rng& rng);

/// [H, W, C] -> [nWin, w*w, C], windows in row-major order, pixels row-major inside.
Tensor window_partition(const Tensor& x, int window);
/// Inverse of window_partition.
Tensor window_reverse(const Tensor& windows, int64_t height, int64_t width);

/// Table slot for the offset between pixels i and j of a window (row-major indices).
std::vector<int64_t> relative_position_index(int window);

/// Expands the table to per-head bias matrices [heads, w*w, w*w].
Tensor relative_bias(const Tensor& table, int window);

/// [nWin, w*w, w*w] of {0, kMaskSentinel} for a map cyclically shifted by -shift.
/// All zeros when shift == 0.
Tensor shift_mask(int64_t height, int64_t width, int window, int shift);

/// Scaled dot-product attention inside each window.
///
/// qkv: [nWin, T, 3C]; bias: [heads, T, T]; mask: undefined or [nWin, T, T].
/// Returns [nWin, T, C]. When `probabilities` is non-null it receives the
/// softmax rows [nWin, heads, T, T].
Tensor window_attention(const Tensor& qkv, const Tensor& bias, const Tensor& mask, int heads,
                        Tensor* probabilities = nullptr);

/// roll(-s) -> partition -> attention -> projection -> reverse -> roll(+s).
Tensor swsa(const Tensor& x, const AttentionParams& params, ShiftConfig shift, Tensor* probabilities = nullptr);

}  // namespace drnet
