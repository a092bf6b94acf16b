// SPDX-License-Identifier: Apache-2.0

#include "drnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace drnet {

namespace detail {

double dot(const float* a, const float* b, int64_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int64_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += static_cast<double>(a[i]) * b[i];
        s1 += static_cast<double>(a[i + 1]) * b[i + 1];
        s2 += static_cast<double>(a[i + 2]) * b[i + 2];
        s3 += static_cast<double>(a[i + 3]) * b[i + 3];
    }
    for (; i < n; ++i) s0 += static_cast<double>(a[i]) * b[i];
    return (s0 + s1) + (s2 + s3);
}

}  // namespace detail

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

void require_rank(const Tensor& x, int64_t rank, const char* op) {
    if (x.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             shape_str(x.shape()));
    }
}

// grad[i] += src[i]
void accumulate(const Tensor& t, std::span<const float> src) {
    auto g = t.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) g[i] += src[i];
}

void accumulate(const Tensor& t, const std::vector<double>& src) {
    auto g = t.grad_buffer();
    for (size_t i = 0; i < g.size(); ++i) g[i] += static_cast<float>(src[i]);
}

}  // namespace

Tensor gather(const Tensor& x, Shape out_shape, std::vector<int64_t> src_index) {
    Tensor out(std::move(out_shape));
    auto in = x.data();
    auto o = out.mutable_data();
    for (size_t i = 0; i < o.size(); ++i) o[i] = in[static_cast<size_t>(src_index[i])];
    count_op(0);
    if (Tape* tape = recording_tape({&x})) {
        tape->record(out, [x, idx = std::move(src_index)](std::span<const float> g) mutable {
            if (!x.requires_grad()) return;
            auto gx = x.grad_buffer();
            for (size_t i = 0; i < g.size(); ++i) gx[static_cast<size_t>(idx[i])] += g[i];
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    auto x = a.data(), y = b.data();
    auto o = out.mutable_data();
    for (size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
    count_op(0);
    if (Tape* tape = recording_tape({&a, &b})) {
        tape->record(out, [a, b](std::span<const float> g) mutable {
            if (a.requires_grad()) accumulate(a, g);
            if (b.requires_grad()) accumulate(b, g);
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    auto x = a.data(), y = b.data();
    auto o = out.mutable_data();
    for (size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
    count_op(0);
    if (Tape* tape = recording_tape({&a, &b})) {
        tape->record(out, [a, b](std::span<const float> g) mutable {
            if (a.requires_grad()) accumulate(a, g);
            if (b.requires_grad()) {
                auto gb = b.grad_buffer();
                for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, float factor) {
    Tensor out(a.shape());
    auto x = a.data();
    auto o = out.mutable_data();
    for (size_t i = 0; i < o.size(); ++i) o[i] = x[i] * factor;
    count_op(0);
    if (Tape* tape = recording_tape({&a})) {
        tape->record(out, [a, factor](std::span<const float> g) mutable {
            auto ga = a.grad_buffer();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor;
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    Tensor out(std::move(shape), std::vector<float>(x.data().begin(), x.data().end()));
    if (Tape* tape = recording_tape({&x})) {
        tape->record(out, [x](std::span<const float> g) mutable { accumulate(x, g); });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.rank() != 2 || bias.rank() != 1 || x.rank() < 1 || x.dim(-1) != weight.dim(1) ||
        bias.dim(0) != weight.dim(0)) {
        throw DimensionError("linear: incompatible shapes x" + shape_str(x.shape()) + " W" +
                             shape_str(weight.shape()) + " b" + shape_str(bias.shape()));
    }
    const int64_t din = weight.dim(1);
    const int64_t dout = weight.dim(0);
    const int64_t rows = x.numel() / din;
    Shape out_shape = x.shape();
    out_shape.back() = dout;
    Tensor out(out_shape);
    {
        const float* xp = x.data().data();
        const float* wp = weight.data().data();
        const float* bp = bias.data().data();
        float* op = out.mutable_data().data();
        for (int64_t m = 0; m < rows; ++m) {
            const float* xr = xp + m * din;
            float* orow = op + m * dout;
            for (int64_t o = 0; o < dout; ++o) {
                orow[o] = static_cast<float>(detail::dot(wp + o * din, xr, din) + bp[o]);
            }
        }
    }
    count_op(rows * din * dout);
    if (Tape* tape = recording_tape({&x, &weight, &bias})) {
        tape->record(out, [x, weight, bias, rows, din, dout](std::span<const float> g) mutable {
            const float* xp = x.data().data();
            const float* wp = weight.data().data();
            if (x.requires_grad()) {
                auto gx = x.grad_buffer();
                std::vector<double> acc(static_cast<size_t>(din));
                for (int64_t m = 0; m < rows; ++m) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int64_t o = 0; o < dout; ++o) {
                        const double go = g[static_cast<size_t>(m * dout + o)];
                        if (go == 0.0) continue;
                        const float* wr = wp + o * din;
                        for (int64_t i = 0; i < din; ++i) acc[static_cast<size_t>(i)] += go * wr[i];
                    }
                    float* gr = gx.data() + m * din;
                    for (int64_t i = 0; i < din; ++i) gr[i] += static_cast<float>(acc[static_cast<size_t>(i)]);
                }
            }
            if (weight.requires_grad()) {
                std::vector<double> acc(static_cast<size_t>(dout * din), 0.0);
                for (int64_t m = 0; m < rows; ++m) {
                    const float* xr = xp + m * din;
                    for (int64_t o = 0; o < dout; ++o) {
                        const double go = g[static_cast<size_t>(m * dout + o)];
                        if (go == 0.0) continue;
                        double* ar = acc.data() + o * din;
                        for (int64_t i = 0; i < din; ++i) ar[i] += go * xr[i];
                    }
                }
                accumulate(weight, acc);
            }
            if (bias.requires_grad()) {
                std::vector<double> acc(static_cast<size_t>(dout), 0.0);
                for (int64_t m = 0; m < rows; ++m) {
                    for (int64_t o = 0; o < dout; ++o) acc[static_cast<size_t>(o)] += g[static_cast<size_t>(m * dout + o)];
                }
                accumulate(bias, acc);
            }
        });
    }
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    require_rank(x, 3, "conv2d");
    require_rank(kernel, 4, "conv2d");
    const int64_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int64_t cout = kernel.dim(0), ks = kernel.dim(2);
    if (kernel.dim(1) != cin || kernel.dim(3) != ks || ks % 2 == 0 || bias.rank() != 1 || bias.dim(0) != cout) {
        throw DimensionError("conv2d: incompatible shapes x" + shape_str(x.shape()) + " k" +
                             shape_str(kernel.shape()) + " b" + shape_str(bias.shape()));
    }
    const int64_t pad = ks / 2;
    const int64_t hw = h * w;
    const int64_t cols = cin * ks * ks;

    // im2col: col[p, (c, ky, kx)] with zero padding.
    auto build_columns = [=](const float* xp) {
        std::vector<float> col(static_cast<size_t>(hw * cols), 0.0f);
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t xx = 0; xx < w; ++xx) {
                float* row = col.data() + (y * w + xx) * cols;
                for (int64_t c = 0; c < cin; ++c) {
                    for (int64_t ky = 0; ky < ks; ++ky) {
                        const int64_t sy = y + ky - pad;
                        if (sy < 0 || sy >= h) continue;
                        for (int64_t kx = 0; kx < ks; ++kx) {
                            const int64_t sx = xx + kx - pad;
                            if (sx < 0 || sx >= w) continue;
                            row[(c * ks + ky) * ks + kx] = xp[(c * h + sy) * w + sx];
                        }
                    }
                }
            }
        }
        return col;
    };

    auto col = std::make_shared<std::vector<float>>(build_columns(x.data().data()));
    Tensor out({cout, h, w});
    {
        const float* kp = kernel.data().data();
        const float* bp = bias.data().data();
        float* op = out.mutable_data().data();
        for (int64_t p = 0; p < hw; ++p) {
            const float* cr = col->data() + p * cols;
            for (int64_t o = 0; o < cout; ++o) {
                op[o * hw + p] = static_cast<float>(detail::dot(kp + o * cols, cr, cols) + bp[o]);
            }
        }
    }
    count_op(hw * cols * cout);
    if (Tape* tape = recording_tape({&x, &kernel, &bias})) {
        tape->record(out, [=](std::span<const float> g) mutable {
            Tensor xg = x, kg = kernel, bg = bias;
            const float* kp = kernel.data().data();
            if (xg.requires_grad()) {
                auto gx = xg.grad_buffer();
                std::vector<double> acc(static_cast<size_t>(cols));
                for (int64_t p = 0; p < hw; ++p) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int64_t o = 0; o < cout; ++o) {
                        const double go = g[static_cast<size_t>(o * hw + p)];
                        if (go == 0.0) continue;
                        const float* kr = kp + o * cols;
                        for (int64_t j = 0; j < cols; ++j) acc[static_cast<size_t>(j)] += go * kr[j];
                    }
                    const int64_t y = p / w, xx = p % w;
                    for (int64_t c = 0; c < cin; ++c) {
                        for (int64_t ky = 0; ky < ks; ++ky) {
                            const int64_t sy = y + ky - pad;
                            if (sy < 0 || sy >= h) continue;
                            for (int64_t kx = 0; kx < ks; ++kx) {
                                const int64_t sx = xx + kx - pad;
                                if (sx < 0 || sx >= w) continue;
                                gx[static_cast<size_t>((c * h + sy) * w + sx)] +=
                                    static_cast<float>(acc[static_cast<size_t>((c * ks + ky) * ks + kx)]);
                            }
                        }
                    }
                }
            }
            if (kg.requires_grad()) {
                std::vector<double> acc(static_cast<size_t>(cout * cols), 0.0);
                for (int64_t o = 0; o < cout; ++o) {
                    double* ar = acc.data() + o * cols;
                    for (int64_t p = 0; p < hw; ++p) {
                        const double go = g[static_cast<size_t>(o * hw + p)];
                        if (go == 0.0) continue;
                        const float* cr = col->data() + p * cols;
                        for (int64_t j = 0; j < cols; ++j) ar[j] += go * cr[j];
                    }
                }
                accumulate(kg, acc);
            }
            if (bg.requires_grad()) {
                std::vector<double> acc(static_cast<size_t>(cout), 0.0);
                for (int64_t o = 0; o < cout; ++o) {
                    for (int64_t p = 0; p < hw; ++p) acc[static_cast<size_t>(o)] += g[static_cast<size_t>(o * hw + p)];
                }
                accumulate(bg, acc);
            }
        });
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
    if (x.rank() < 1 || gamma.rank() != 1 || beta.rank() != 1 || gamma.dim(0) != x.dim(-1) ||
        beta.dim(0) != x.dim(-1)) {
        throw DimensionError("layer_norm: incompatible shapes x" + shape_str(x.shape()) + " gamma" +
                             shape_str(gamma.shape()) + " beta" + shape_str(beta.shape()));
    }
    const int64_t d = x.dim(-1);
    const int64_t rows = x.numel() / d;
    Tensor out(x.shape());
    auto xhat = std::make_shared<std::vector<float>>(static_cast<size_t>(x.numel()));
    auto rstd = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    {
        const float* xp = x.data().data();
        const float* gp = gamma.data().data();
        const float* bp = beta.data().data();
        float* op = out.mutable_data().data();
        for (int64_t r = 0; r < rows; ++r) {
            const float* xr = xp + r * d;
            double mu = 0.0;
            for (int64_t i = 0; i < d; ++i) mu += xr[i];
            mu /= static_cast<double>(d);
            double var = 0.0;
            for (int64_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
            var /= static_cast<double>(d);
            const double rs = 1.0 / std::sqrt(var + eps);
            (*rstd)[static_cast<size_t>(r)] = rs;
            for (int64_t i = 0; i < d; ++i) {
                const double xh = (xr[i] - mu) * rs;
                (*xhat)[static_cast<size_t>(r * d + i)] = static_cast<float>(xh);
                op[r * d + i] = static_cast<float>(gp[i] * xh + bp[i]);
            }
        }
    }
    count_op(0);
    if (Tape* tape = recording_tape({&x, &gamma, &beta})) {
        tape->record(out, [=](std::span<const float> g) mutable {
            Tensor xg = x, gg = gamma, bg = beta;
            const float* gp = gamma.data().data();
            if (xg.requires_grad()) {
                auto gx = xg.grad_buffer();
                std::vector<double> dxh(static_cast<size_t>(d));
                for (int64_t r = 0; r < rows; ++r) {
                    double m1 = 0.0, m2 = 0.0;
                    for (int64_t i = 0; i < d; ++i) {
                        const double v = static_cast<double>(g[static_cast<size_t>(r * d + i)]) * gp[i];
                        dxh[static_cast<size_t>(i)] = v;
                        m1 += v;
                        m2 += v * (*xhat)[static_cast<size_t>(r * d + i)];
                    }
                    m1 /= static_cast<double>(d);
                    m2 /= static_cast<double>(d);
                    const double rs = (*rstd)[static_cast<size_t>(r)];
                    for (int64_t i = 0; i < d; ++i) {
                        const double xh = (*xhat)[static_cast<size_t>(r * d + i)];
                        gx[static_cast<size_t>(r * d + i)] +=
                            static_cast<float>(rs * (dxh[static_cast<size_t>(i)] - m1 - xh * m2));
                    }
                }
            }
            if (gg.requires_grad() || bg.requires_grad()) {
                std::vector<double> dg(static_cast<size_t>(d), 0.0), db(static_cast<size_t>(d), 0.0);
                for (int64_t r = 0; r < rows; ++r) {
                    for (int64_t i = 0; i < d; ++i) {
                        const double gv = g[static_cast<size_t>(r * d + i)];
                        dg[static_cast<size_t>(i)] += gv * (*xhat)[static_cast<size_t>(r * d + i)];
                        db[static_cast<size_t>(i)] += gv;
                    }
                }
                if (gg.requires_grad()) accumulate(gg, dg);
                if (bg.requires_grad()) accumulate(bg, db);
            }
        });
    }
    return out;
}

Tensor softmax(const Tensor& x) {
    if (x.rank() < 1) throw DimensionError("softmax: scalar input");
    const int64_t d = x.dim(-1);
    const int64_t rows = x.numel() / d;
    Tensor out(x.shape());
    {
        const float* xp = x.data().data();
        float* op = out.mutable_data().data();
        for (int64_t r = 0; r < rows; ++r) {
            const float* xr = xp + r * d;
            float* orow = op + r * d;
            const float mx = *std::max_element(xr, xr + d);
            double total = 0.0;
            for (int64_t i = 0; i < d; ++i) total += std::exp(static_cast<double>(xr[i]) - mx);
            for (int64_t i = 0; i < d; ++i) {
                orow[i] = static_cast<float>(std::exp(static_cast<double>(xr[i]) - mx) / total);
            }
        }
    }
    count_op(0);
    if (Tape* tape = recording_tape({&x})) {
        tape->record(out, [x, out, rows, d](std::span<const float> g) mutable {
            auto gx = x.grad_buffer();
            const float* yp = out.data().data();
            for (int64_t r = 0; r < rows; ++r) {
                double s = 0.0;
                for (int64_t i = 0; i < d; ++i) {
                    s += static_cast<double>(g[static_cast<size_t>(r * d + i)]) * yp[r * d + i];
                }
                for (int64_t i = 0; i < d; ++i) {
                    const size_t k = static_cast<size_t>(r * d + i);
                    gx[k] += static_cast<float>(yp[k] * (g[k] - s));
                }
            }
        });
    }
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out(x.shape());
    auto xp = x.data();
    auto op = out.mutable_data();
    for (size_t i = 0; i < op.size(); ++i) {
        const double v = xp[i];
        op[i] = static_cast<float>(0.5 * v * (1.0 + std::erf(v * kInvSqrt2)));
    }
    count_op(0);
    if (Tape* tape = recording_tape({&x})) {
        tape->record(out, [x](std::span<const float> g) mutable {
            auto gx = x.grad_buffer();
            auto xp = x.data();
            constexpr double inv_sqrt_2pi = 0.3989422804014327;
            for (size_t i = 0; i < gx.size(); ++i) {
                const double v = xp[i];
                const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
                gx[i] += static_cast<float>(g[i] * (cdf + v * pdf));
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (float v : x.data()) total += v;
    Tensor out = Tensor::of({1}, {static_cast<float>(total)});
    count_op(0);
    if (Tape* tape = recording_tape({&x})) {
        tape->record(out, [x](std::span<const float> g) mutable {
            auto gx = x.grad_buffer();
            for (float& v : gx) v += g[0];
        });
    }
    return out;
}

Tensor mean(const Tensor& x) {
    double total = 0.0;
    for (float v : x.data()) total += v;
    const double n = static_cast<double>(x.numel());
    Tensor out = Tensor::of({1}, {static_cast<float>(total / n)});
    count_op(0);
    if (Tape* tape = recording_tape({&x})) {
        tape->record(out, [x, n](std::span<const float> g) mutable {
            auto gx = x.grad_buffer();
            const float s = static_cast<float>(g[0] / n);
            for (float& v : gx) v += s;
        });
    }
    return out;
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "l1_loss");
    auto p = pred.data(), t = target.data();
    double total = 0.0;
    for (size_t i = 0; i < p.size(); ++i) total += std::abs(static_cast<double>(p[i]) - t[i]);
    const double n = static_cast<double>(pred.numel());
    Tensor out = Tensor::of({1}, {static_cast<float>(total / n)});
    count_op(0);
    if (Tape* tape = recording_tape({&pred, &target})) {
        tape->record(out, [pred, target, n](std::span<const float> g) mutable {
            auto p = pred.data(), t = target.data();
            const float s = static_cast<float>(g[0] / n);
            auto sign = [](float d) { return d > 0.0f ? 1.0f : (d < 0.0f ? -1.0f : 0.0f); };
            if (pred.requires_grad()) {
                auto gp = pred.grad_buffer();
                for (size_t i = 0; i < gp.size(); ++i) gp[i] += s * sign(p[i] - t[i]);
            }
            if (target.requires_grad()) {
                auto gt = target.grad_buffer();
                for (size_t i = 0; i < gt.size(); ++i) gt[i] -= s * sign(p[i] - t[i]);
            }
        });
    }
    return out;
}

Tensor weighted_sum(std::span<const Tensor> terms, const Tensor& weights) {
    if (terms.empty()) throw DimensionError("weighted_sum: no terms");
    if (weights.rank() != 1 || weights.dim(0) != static_cast<int64_t>(terms.size())) {
        throw DimensionError("weighted_sum: " + std::to_string(terms.size()) + " terms but weights " +
                             shape_str(weights.shape()));
    }
    for (const Tensor& t : terms) require_same_shape(t, terms[0], "weighted_sum");
    const auto wv = weights.data();
    Tensor out(terms[0].shape());
    auto op = out.mutable_data();
    std::vector<double> acc(op.size(), 0.0);
    for (size_t j = 0; j < terms.size(); ++j) {
        auto tp = terms[j].data();
        const double wj = wv[j];
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += wj * tp[i];
    }
    for (size_t i = 0; i < op.size(); ++i) op[i] = static_cast<float>(acc[i]);
    count_op(static_cast<int64_t>(terms.size()) * out.numel());

    std::vector<Tensor> inputs(terms.begin(), terms.end());
    inputs.push_back(weights);
    if (Tape* tape = recording_tape(std::span<const Tensor>(inputs))) {
        inputs.pop_back();
        tape->record(out, [terms = std::move(inputs), weights](std::span<const float> g) mutable {
            auto wv = weights.data();
            std::vector<double> dw(terms.size(), 0.0);
            for (size_t j = 0; j < terms.size(); ++j) {
                auto tp = terms[j].data();
                if (terms[j].requires_grad()) {
                    auto gt = terms[j].grad_buffer();
                    for (size_t i = 0; i < gt.size(); ++i) gt[i] += wv[j] * g[i];
                }
                if (weights.requires_grad()) {
                    double s = 0.0;
                    for (size_t i = 0; i < g.size(); ++i) s += static_cast<double>(g[i]) * tp[i];
                    dw[j] = s;
                }
            }
            if (weights.requires_grad()) accumulate(weights, dw);
        });
    }
    return out;
}

Tensor concat0(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank() || a.rank() < 1 ||
        !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
        throw DimensionError("concat0: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    Shape shape = a.shape();
    shape[0] += b.dim(0);
    Tensor out(shape);
    auto op = out.mutable_data();
    std::copy(a.data().begin(), a.data().end(), op.begin());
    std::copy(b.data().begin(), b.data().end(), op.begin() + a.numel());
    count_op(0);
    if (Tape* tape = recording_tape({&a, &b})) {
        tape->record(out, [a, b](std::span<const float> g) mutable {
            if (a.requires_grad()) accumulate(a, g.subspan(0, static_cast<size_t>(a.numel())));
            if (b.requires_grad()) accumulate(b, g.subspan(static_cast<size_t>(a.numel())));
        });
    }
    return out;
}

Tensor to_channels_last(const Tensor& x) {
    require_rank(x, 3, "to_channels_last");
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    std::vector<int64_t> idx(static_cast<size_t>(x.numel()));
    for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < w; ++xx)
            for (int64_t k = 0; k < c; ++k) idx[static_cast<size_t>((y * w + xx) * c + k)] = (k * h + y) * w + xx;
    return gather(x, {h, w, c}, std::move(idx));
}

Tensor to_channels_first(const Tensor& x) {
    require_rank(x, 3, "to_channels_first");
    const int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    std::vector<int64_t> idx(static_cast<size_t>(x.numel()));
    for (int64_t k = 0; k < c; ++k)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t xx = 0; xx < w; ++xx) idx[static_cast<size_t>((k * h + y) * w + xx)] = (y * w + xx) * c + k;
    return gather(x, {c, h, w}, std::move(idx));
}

Tensor roll2d(const Tensor& x, int64_t dy, int64_t dx) {
    require_rank(x, 3, "roll2d");
    const int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    std::vector<int64_t> idx(static_cast<size_t>(x.numel()));
    for (int64_t y = 0; y < h; ++y) {
        const int64_t sy = (((y - dy) % h) + h) % h;
        for (int64_t xx = 0; xx < w; ++xx) {
            const int64_t sx = (((xx - dx) % w) + w) % w;
            for (int64_t k = 0; k < c; ++k) idx[static_cast<size_t>((y * w + xx) * c + k)] = (sy * w + sx) * c + k;
        }
    }
    return gather(x, x.shape(), std::move(idx));
}

Tensor reflect_pad(const Tensor& x, int64_t pad_bottom, int64_t pad_right) {
    require_rank(x, 3, "reflect_pad");
    if (pad_bottom < 0 || pad_right < 0) throw DimensionError("reflect_pad: negative padding");
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int64_t oh = h + pad_bottom, ow = w + pad_right;
    auto reflect = [](int64_t i, int64_t n) {
        if (n == 1) return int64_t{0};
        const int64_t period = 2 * (n - 1);
        i %= period;
        return i < n ? i : period - i;
    };
    std::vector<int64_t> idx(static_cast<size_t>(c * oh * ow));
    for (int64_t k = 0; k < c; ++k)
        for (int64_t y = 0; y < oh; ++y)
            for (int64_t xx = 0; xx < ow; ++xx)
                idx[static_cast<size_t>((k * oh + y) * ow + xx)] = (k * h + reflect(y, h)) * w + reflect(xx, w);
    return gather(x, {c, oh, ow}, std::move(idx));
}

Tensor crop(const Tensor& x, int64_t height, int64_t width) {
    require_rank(x, 3, "crop");
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (height < 1 || width < 1 || height > h || width > w) {
        throw DimensionError("crop: " + std::to_string(height) + "x" + std::to_string(width) +
                             " exceeds " + shape_str(x.shape()));
    }
    std::vector<int64_t> idx(static_cast<size_t>(c * height * width));
    for (int64_t k = 0; k < c; ++k)
        for (int64_t y = 0; y < height; ++y)
            for (int64_t xx = 0; xx < width; ++xx)
                idx[static_cast<size_t>((k * height + y) * width + xx)] = (k * h + y) * w + xx;
    return gather(x, {c, height, width}, std::move(idx));
}

}  // namespace drnet
