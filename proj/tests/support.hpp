// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers and independent reference implementations. The oracles
// here are deliberately naive (plain loops in double) and share no code with
// the library beyond the Tensor container.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "drnet/attention.hpp"
#include "drnet/gradcheck.hpp"
#include "drnet/init.hpp"
#include "drnet/ops.hpp"
#include "drnet/tensor.hpp"

namespace drnet::test {

inline Tensor random_tensor(Shape shape, Rng& rng, float bound = 1.0f) { return uniform(std::move(shape), bound, rng); }

/// Scalar probe <c, y> with fixed random coefficients, so every output entry
/// contributes a distinct weight to the gradient.
inline Tensor probe(const Tensor& y, const Tensor& coeffs) {
    return linear(reshape(y, {y.numel()}), coeffs, Tensor::zeros({1}));
}

inline Tensor probe_coefficients(int64_t n, Rng& rng) { return uniform({1, n}, 1.0f, rng); }

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

inline double max_abs_diff(const Tensor& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b[i]));
    return m;
}

namespace oracle {

/// y[r, o] = sum_i W[o, i] x[r, i] + b[o]
inline std::vector<double> linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int64_t din = w.dim(1), dout = w.dim(0), rows = x.numel() / din;
    std::vector<double> y(static_cast<size_t>(rows * dout));
    for (int64_t r = 0; r < rows; ++r) {
        for (int64_t o = 0; o < dout; ++o) {
            double s = b.data()[static_cast<size_t>(o)];
            for (int64_t i = 0; i < din; ++i) {
                s += static_cast<double>(w.data()[static_cast<size_t>(o * din + i)]) * x.data()[static_cast<size_t>(r * din + i)];
            }
            y[static_cast<size_t>(r * dout + o)] = s;
        }
    }
    return y;
}

/// Direct sliding-window "same" convolution with zero padding.
inline std::vector<double> conv2d(const Tensor& x, const Tensor& k, const Tensor& b) {
    const int64_t cin = x.dim(0), h = x.dim(1), w = x.dim(2), cout = k.dim(0), s = k.dim(2), r = s / 2;
    std::vector<double> y(static_cast<size_t>(cout * h * w));
    for (int64_t o = 0; o < cout; ++o) {
        for (int64_t yy = 0; yy < h; ++yy) {
            for (int64_t xx = 0; xx < w; ++xx) {
                double acc = b.data()[static_cast<size_t>(o)];
                for (int64_t c = 0; c < cin; ++c) {
                    for (int64_t dy = 0; dy < s; ++dy) {
                        for (int64_t dx = 0; dx < s; ++dx) {
                            const int64_t sy = yy + dy - r, sx = xx + dx - r;
                            if (sy < 0 || sx < 0 || sy >= h || sx >= w) continue;
                            acc += static_cast<double>(k.data()[static_cast<size_t>(((o * cin + c) * s + dy) * s + dx)]) *
                                   x.data()[static_cast<size_t>((c * h + sy) * w + sx)];
                        }
                    }
                }
                y[static_cast<size_t>((o * h + yy) * w + xx)] = acc;
            }
        }
    }
    return y;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline std::vector<double> softmax(std::vector<double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double& e : v) s += (e = std::exp(e - m));
    for (double& e : v) e /= s;
    return v;
}

/// Separable 1-D Haar composition: rows first, then columns, each step
/// (p + q)/sqrt2 and (p - q)/sqrt2. Returns {ll, lh, hl, hh} planes flattened.
inline std::array<std::vector<double>, 4> haar(const Tensor& x) {
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2), oh = h / 2, ow = w / 2;
    const double r2 = std::sqrt(0.5);
    std::array<std::vector<double>, 4> out;
    for (auto& v : out) v.assign(static_cast<size_t>(c * oh * ow), 0.0);
    for (int64_t k = 0; k < c; ++k) {
        for (int64_t y = 0; y < oh; ++y) {
            for (int64_t xx = 0; xx < ow; ++xx) {
                auto at = [&](int64_t dy, int64_t dx) {
                    return static_cast<double>(x.data()[static_cast<size_t>((k * h + 2 * y + dy) * w + 2 * xx + dx)]);
                };
                // Horizontal pass on both rows.
                const double top_lo = (at(0, 0) + at(0, 1)) * r2, top_hi = (at(0, 0) - at(0, 1)) * r2;
                const double bot_lo = (at(1, 0) + at(1, 1)) * r2, bot_hi = (at(1, 0) - at(1, 1)) * r2;
                const size_t i = static_cast<size_t>((k * oh + y) * ow + xx);
                // Vertical pass: lh is the row difference of the horizontal low-pass.
                out[0][i] = (top_lo + bot_lo) * r2;
                out[1][i] = (top_lo - bot_lo) * r2;
                out[2][i] = (top_hi + bot_hi) * r2;
                out[3][i] = (top_hi - bot_hi) * r2;
            }
        }
    }
    return out;
}

/// Dense multi-head attention over tokens [T, C] with per-head bias [heads, T, T]
/// (may be empty) and an optional additive mask [T, T] (may be empty).
/// Returns the pre-projection head outputs [T, C] and the probabilities.
struct AttentionResult {
    std::vector<double> out;    // [T, C]
    std::vector<double> probs;  // [heads, T, T]
};

inline AttentionResult attention(const std::vector<double>& q, const std::vector<double>& k,
                                 const std::vector<double>& v, int64_t tokens, int64_t channels, int heads,
                                 const std::vector<double>& bias, const std::vector<double>& mask) {
    const int64_t hd = channels / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    AttentionResult r;
    r.out.assign(static_cast<size_t>(tokens * channels), 0.0);
    r.probs.assign(static_cast<size_t>(heads * tokens * tokens), 0.0);
    for (int h = 0; h < heads; ++h) {
        for (int64_t i = 0; i < tokens; ++i) {
            std::vector<double> logits(static_cast<size_t>(tokens));
            for (int64_t j = 0; j < tokens; ++j) {
                double s = 0.0;
                for (int64_t d = 0; d < hd; ++d) {
                    s += q[static_cast<size_t>(i * channels + h * hd + d)] * k[static_cast<size_t>(j * channels + h * hd + d)];
                }
                s *= scale;
                if (!bias.empty()) s += bias[static_cast<size_t>((h * tokens + i) * tokens + j)];
                if (!mask.empty()) s += mask[static_cast<size_t>(i * tokens + j)];
                logits[static_cast<size_t>(j)] = s;
            }
            const auto p = softmax(logits);
            for (int64_t j = 0; j < tokens; ++j) {
                r.probs[static_cast<size_t>((h * tokens + i) * tokens + j)] = p[static_cast<size_t>(j)];
                for (int64_t d = 0; d < hd; ++d) {
                    r.out[static_cast<size_t>(i * channels + h * hd + d)] +=
                        p[static_cast<size_t>(j)] * v[static_cast<size_t>(j * channels + h * hd + d)];
                }
            }
        }
    }
    return r;
}

// Dense reference for one window covering the whole map x[H, W, C]. A pixel at
// position p of the shifted frame wrapped around if p >= n - shift; pairs with
// different wrap status are masked.
inline std::vector<double> swsa_single_window(const Tensor& x, const AttentionParams& p, int shift) {
    const int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2), t = h * w;
    const int win = p.window;
    // Cyclic shift by -shift: shifted[y, x] = x[(y + s) mod H, (x + s) mod W].
    Tensor shifted({h, w, c});
    for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < w; ++xx)
            for (int64_t ch = 0; ch < c; ++ch)
                shifted.mutable_data()[static_cast<size_t>((y * w + xx) * c + ch)] =
                    x.data()[static_cast<size_t>((((y + shift) % h) * w + (xx + shift) % w) * c + ch)];
    const auto qkv = oracle::linear(shifted, p.qkv_weight, p.qkv_bias);
    std::vector<double> q(static_cast<size_t>(t * c)), k(q.size()), v(q.size());
    for (int64_t i = 0; i < t; ++i)
        for (int64_t ch = 0; ch < c; ++ch) {
            q[static_cast<size_t>(i * c + ch)] = qkv[static_cast<size_t>(i * 3 * c + ch)];
            k[static_cast<size_t>(i * c + ch)] = qkv[static_cast<size_t>(i * 3 * c + c + ch)];
            v[static_cast<size_t>(i * c + ch)] = qkv[static_cast<size_t>(i * 3 * c + 2 * c + ch)];
        }
    const int64_t span = 2 * win - 1;
    std::vector<double> bias(static_cast<size_t>(p.heads * t * t));
    for (int hd = 0; hd < p.heads; ++hd)
        for (int64_t i = 0; i < t; ++i)
            for (int64_t j = 0; j < t; ++j) {
                const int64_t dy = i / w - j / w, dx = i % w - j % w;
                bias[static_cast<size_t>((hd * t + i) * t + j)] =
                    p.rel_bias_table.data()[static_cast<size_t>(hd * span * span + (dy + win - 1) * span + dx + win - 1)];
            }
    std::vector<double> mask;
    if (shift > 0) {
        mask.assign(static_cast<size_t>(t * t), 0.0);
        auto label = [&](int64_t i) { return (i / w >= h - shift ? 2 : 0) + (i % w >= w - shift ? 1 : 0); };
        for (int64_t i = 0; i < t; ++i)
            for (int64_t j = 0; j < t; ++j)
                if (label(i) != label(j)) mask[static_cast<size_t>(i * t + j)] = kMaskSentinel;
    }
    const auto att = attention(q, k, v, t, c, p.heads, bias, mask);
    Tensor att_t({t, c});
    for (size_t i = 0; i < att.out.size(); ++i) att_t.mutable_data()[i] = static_cast<float>(att.out[i]);
    const auto proj = oracle::linear(att_t, p.proj_weight, p.proj_bias);
    // Undo the shift.
    std::vector<double> out(proj.size());
    for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < w; ++xx)
            for (int64_t ch = 0; ch < c; ++ch)
                out[static_cast<size_t>((((y + shift) % h) * w + (xx + shift) % w) * c + ch)] =
                    proj[static_cast<size_t>((y * w + xx) * c + ch)];
    return out;
}

}  // namespace oracle

}  // namespace drnet::test
