// SPDX-License-Identifier: Apache-2.0

#include "drnet/attention.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "drnet/ops.hpp"

namespace drnet {

AttentionParams make_attention_params(int64_t channels, int heads, int window, Rng& rng) {
    if (heads < 1 || channels % heads != 0) {
        throw DimensionError("attention: " + std::to_string(channels) + " channels not divisible by " +
                             std::to_string(heads) + " heads");
    }
    if (window < 1) throw DimensionError("attention: window must be positive");
    AttentionParams p;
    p.qkv_weight = fan_in_uniform({3 * channels, channels}, channels, rng);
    p.qkv_bias = Tensor::zeros({3 * channels});
    p.proj_weight = fan_in_uniform({channels, channels}, channels, rng);
    p.proj_bias = Tensor::zeros({channels});
    const int64_t span = 2 * window - 1;
    p.rel_bias_table = Tensor::zeros({heads, span * span});
    p.heads = heads;
    p.window = window;
    return p;
}

Tensor window_partition(const Tensor& x, int window) {
    if (x.rank() != 3) throw DimensionError("window_partition: expected [H, W, C], got " + shape_str(x.shape()));
    const int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (window < 1 || h % window != 0 || w % window != 0) {
        throw DimensionError("window_partition: " + shape_str(x.shape()) + " not divisible by window " +
                             std::to_string(window));
    }
    const int64_t wy = h / window, wx = w / window, t = int64_t{window} * window;
    std::vector<int64_t> idx(static_cast<size_t>(x.numel()));
    size_t k = 0;
    for (int64_t by = 0; by < wy; ++by)
        for (int64_t bx = 0; bx < wx; ++bx)
            for (int64_t iy = 0; iy < window; ++iy)
                for (int64_t ix = 0; ix < window; ++ix)
                    for (int64_t ch = 0; ch < c; ++ch)
                        idx[k++] = ((by * window + iy) * w + bx * window + ix) * c + ch;
    return gather(x, {wy * wx, t, c}, std::move(idx));
}

Tensor window_reverse(const Tensor& windows, int64_t height, int64_t width) {
    if (windows.rank() != 3) {
        throw DimensionError("window_reverse: expected [nWin, T, C], got " + shape_str(windows.shape()));
    }
    const int64_t t = windows.dim(1), c = windows.dim(2);
    const auto window = static_cast<int64_t>(std::lround(std::sqrt(static_cast<double>(t))));
    if (window * window != t || height % window != 0 || width % window != 0 ||
        (height / window) * (width / window) != windows.dim(0)) {
        throw DimensionError("window_reverse: " + shape_str(windows.shape()) + " does not tile " +
                             std::to_string(height) + "x" + std::to_string(width));
    }
    const int64_t wx = width / window;
    std::vector<int64_t> idx(static_cast<size_t>(windows.numel()));
    for (int64_t y = 0; y < height; ++y)
        for (int64_t xx = 0; xx < width; ++xx) {
            const int64_t win = (y / window) * wx + xx / window;
            const int64_t pos = (y % window) * window + xx % window;
            for (int64_t ch = 0; ch < c; ++ch)
                idx[static_cast<size_t>((y * width + xx) * c + ch)] = (win * t + pos) * c + ch;
        }
    return gather(windows, {height, width, c}, std::move(idx));
}

std::vector<int64_t> relative_position_index(int window) {
    const int64_t w = window, t = w * w, span = 2 * w - 1;
    std::vector<int64_t> idx(static_cast<size_t>(t * t));
    for (int64_t i = 0; i < t; ++i)
        for (int64_t j = 0; j < t; ++j) {
            const int64_t dy = i / w - j / w + w - 1;
            const int64_t dx = i % w - j % w + w - 1;
            idx[static_cast<size_t>(i * t + j)] = dy * span + dx;
        }
    return idx;
}

Tensor relative_bias(const Tensor& table, int window) {
    const int64_t span = 2 * int64_t{window} - 1;
    if (table.rank() != 2 || table.dim(1) != span * span) {
        throw DimensionError("relative_bias: table " + shape_str(table.shape()) + " does not match window " +
                             std::to_string(window));
    }
    const int64_t heads = table.dim(0), t = int64_t{window} * window;
    const auto rel = relative_position_index(window);
    std::vector<int64_t> idx(static_cast<size_t>(heads * t * t));
    for (int64_t h = 0; h < heads; ++h)
        for (int64_t k = 0; k < t * t; ++k) idx[static_cast<size_t>(h * t * t + k)] = h * span * span + rel[static_cast<size_t>(k)];
    return gather(table, {heads, t, t}, std::move(idx));
}

Tensor shift_mask(int64_t height, int64_t width, int window, int shift) {
    if (shift < 0 || shift >= window) {
        throw DimensionError("shift_mask: shift " + std::to_string(shift) + " outside [0, " + std::to_string(window) + ")");
    }
    if (height % window != 0 || width % window != 0) {
        throw DimensionError("shift_mask: extents not divisible by window");
    }
    const int64_t t = int64_t{window} * window;
    if (shift == 0) return Tensor({(height / window) * (width / window), t, t});
    // Label the shifted grid by slices [0, n - w), [n - w, n - s), [n - s, n).
    auto slice = [&](int64_t i, int64_t n) { return i < n - window ? 0 : (i < n - shift ? 1 : 2); };
    std::vector<int> label(static_cast<size_t>(height * width));
    for (int64_t y = 0; y < height; ++y)
        for (int64_t x = 0; x < width; ++x) label[static_cast<size_t>(y * width + x)] = slice(y, height) * 3 + slice(x, width);

    const int64_t wx = width / window, nwin = (height / window) * wx;
    Tensor mask({nwin, t, t});
    auto m = mask.mutable_data();
    std::vector<int> win_label(static_cast<size_t>(t));
    for (int64_t win = 0; win < nwin; ++win) {
        const int64_t by = win / wx, bx = win % wx;
        for (int64_t p = 0; p < t; ++p) {
            win_label[static_cast<size_t>(p)] =
                label[static_cast<size_t>((by * window + p / window) * width + bx * window + p % window)];
        }
        for (int64_t i = 0; i < t; ++i)
            for (int64_t j = 0; j < t; ++j)
                m[static_cast<size_t>((win * t + i) * t + j)] =
                    win_label[static_cast<size_t>(i)] == win_label[static_cast<size_t>(j)] ? 0.0f : kMaskSentinel;
    }
    return mask;
}

Tensor window_attention(const Tensor& qkv, const Tensor& bias, const Tensor& mask, int heads, Tensor* probabilities) {
    if (qkv.rank() != 3 || qkv.dim(2) % 3 != 0) {
        throw DimensionError("window_attention: expected qkv [nWin, T, 3C], got " + shape_str(qkv.shape()));
    }
    const int64_t nwin = qkv.dim(0), t = qkv.dim(1), c = qkv.dim(2) / 3;
    if (heads < 1 || c % heads != 0) throw DimensionError("window_attention: channels not divisible by heads");
    if (bias.shape() != Shape{heads, t, t}) {
        throw DimensionError("window_attention: bias " + shape_str(bias.shape()) + " expected " +
                             shape_str({heads, t, t}));
    }
    if (mask.defined() && mask.shape() != Shape{nwin, t, t}) {
        throw DimensionError("window_attention: mask " + shape_str(mask.shape()) + " expected " +
                             shape_str({nwin, t, t}));
    }
    const int64_t dh = c / heads, row = 3 * c;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor out({nwin, t, c});
    auto probs = std::make_shared<std::vector<float>>(static_cast<size_t>(nwin * heads * t * t));
    {
        const float* qp = qkv.data().data();
        const float* bp = bias.data().data();
        const float* mp = mask.defined() ? mask.data().data() : nullptr;
        float* op = out.mutable_data().data();
        std::vector<double> logits(static_cast<size_t>(t));
        for (int64_t win = 0; win < nwin; ++win) {
            const float* base = qp + win * t * row;
            for (int64_t h = 0; h < heads; ++h) {
                float* prow_base = probs->data() + ((win * heads + h) * t) * t;
                for (int64_t i = 0; i < t; ++i) {
                    const float* qi = base + i * row + h * dh;
                    double mx = -1e300;
                    for (int64_t j = 0; j < t; ++j) {
                        const float* kj = base + j * row + c + h * dh;
                        double s = scale * detail::dot(qi, kj, dh) + bp[(h * t + i) * t + j];
                        if (mp) s += mp[(win * t + i) * t + j];
                        logits[static_cast<size_t>(j)] = s;
                        mx = std::max(mx, s);
                    }
                    double total = 0.0;
                    for (int64_t j = 0; j < t; ++j) {
                        logits[static_cast<size_t>(j)] = std::exp(logits[static_cast<size_t>(j)] - mx);
                        total += logits[static_cast<size_t>(j)];
                    }
                    float* prow = prow_base + i * t;
                    std::vector<double> acc(static_cast<size_t>(dh), 0.0);
                    for (int64_t j = 0; j < t; ++j) {
                        const double pj = logits[static_cast<size_t>(j)] / total;
                        prow[j] = static_cast<float>(pj);
                        const float* vj = base + j * row + 2 * c + h * dh;
                        for (int64_t d = 0; d < dh; ++d) acc[static_cast<size_t>(d)] += pj * vj[d];
                    }
                    float* orow = op + (win * t + i) * c + h * dh;
                    for (int64_t d = 0; d < dh; ++d) orow[d] = static_cast<float>(acc[static_cast<size_t>(d)]);
                }
            }
        }
    }
    count_op(nwin * 2 * t * t * c);
    if (probabilities) *probabilities = Tensor({nwin, heads, t, t}, *probs);

    if (Tape* tape = recording_tape({&qkv, &bias})) {
        tape->record(out, [=](std::span<const float> g) mutable {
            Tensor qg = qkv, bg = bias;
            const float* qp = qkv.data().data();
            std::vector<double> dqkv(static_cast<size_t>(qkv.numel()), 0.0);
            std::vector<double> dbias(static_cast<size_t>(bias.numel()), 0.0);
            std::vector<double> dp(static_cast<size_t>(t)), ds(static_cast<size_t>(t));
            for (int64_t win = 0; win < nwin; ++win) {
                const float* base = qp + win * t * row;
                double* dbase = dqkv.data() + win * t * row;
                for (int64_t h = 0; h < heads; ++h) {
                    const float* pbase = probs->data() + ((win * heads + h) * t) * t;
                    for (int64_t i = 0; i < t; ++i) {
                        const float* go = g.data() + (win * t + i) * c + h * dh;
                        const float* prow = pbase + i * t;
                        double dot_pdp = 0.0;
                        for (int64_t j = 0; j < t; ++j) {
                            const float* vj = base + j * row + 2 * c + h * dh;
                            const double dpj = detail::dot(go, vj, dh);
                            dp[static_cast<size_t>(j)] = dpj;
                            dot_pdp += prow[j] * dpj;
                            // dV_j += P_ij dO_i
                            double* dvj = dbase + j * row + 2 * c + h * dh;
                            for (int64_t d = 0; d < dh; ++d) dvj[d] += static_cast<double>(prow[j]) * go[d];
                        }
                        const float* qi = base + i * row + h * dh;
                        double* dqi = dbase + i * row + h * dh;
                        for (int64_t j = 0; j < t; ++j) {
                            const double dsij = prow[j] * (dp[static_cast<size_t>(j)] - dot_pdp);
                            ds[static_cast<size_t>(j)] = dsij;
                            dbias[static_cast<size_t>((h * t + i) * t + j)] += dsij;
                            if (dsij == 0.0) continue;
                            const float* kj = base + j * row + c + h * dh;
                            double* dkj = dbase + j * row + c + h * dh;
                            const double sds = scale * dsij;
                            for (int64_t d = 0; d < dh; ++d) {
                                dqi[d] += sds * kj[d];
                                dkj[d] += sds * qi[d];
                            }
                        }
                    }
                }
            }
            if (qg.requires_grad()) {
                auto gq = qg.grad_buffer();
                for (size_t i = 0; i < gq.size(); ++i) gq[i] += static_cast<float>(dqkv[i]);
            }
            if (bg.requires_grad()) {
                auto gb = bg.grad_buffer();
                for (size_t i = 0; i < gb.size(); ++i) gb[i] += static_cast<float>(dbias[i]);
            }
        });
    }
    return out;
}

Tensor swsa(const Tensor& x, const AttentionParams& params, ShiftConfig shift, Tensor* probabilities) {
    if (x.rank() != 3 || x.dim(2) != params.channels()) {
        throw DimensionError("swsa: expected [H, W, " + std::to_string(params.channels()) + "], got " +
                             shape_str(x.shape()));
    }
    const int64_t h = x.dim(0), w = x.dim(1);
    const int s = shift.shift;
    Tensor shifted = s > 0 ? roll2d(x, -s, -s) : x;
    Tensor windows = window_partition(shifted, params.window);
    Tensor qkv = linear(windows, params.qkv_weight, params.qkv_bias);
    Tensor bias = relative_bias(params.rel_bias_table, params.window);
    Tensor mask = s > 0 ? shift_mask(h, w, params.window, s) : Tensor();
    Tensor attended = window_attention(qkv, bias, mask, params.heads, probabilities);
    Tensor projected = linear(attended, params.proj_weight, params.proj_bias);
    Tensor merged = window_reverse(projected, h, w);
    return s > 0 ? roll2d(merged, s, s) : merged;
}

}  // namespace drnet
