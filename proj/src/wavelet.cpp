// SPDX-License-Identifier: Apache-2.0

#include "drnet/wavelet.hpp"

#include <array>

namespace drnet {

namespace {

// Signs applied to (a, b, c, d) for ll, lh, hl, hh. The matrix is symmetric and
// orthogonal after the 1/2 scale, so it is its own inverse.
constexpr std::array<std::array<float, 4>, 4> kHaar = {{
    {1.f, 1.f, 1.f, 1.f},
    {1.f, 1.f, -1.f, -1.f},
    {1.f, -1.f, 1.f, -1.f},
    {1.f, -1.f, -1.f, 1.f},
}};

Tensor analysis_band(const Tensor& x, int band) {
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int64_t oh = h / 2, ow = w / 2;
    const auto& s = kHaar[static_cast<size_t>(band)];
    Tensor out({c, oh, ow});
    auto xp = x.data();
    auto op = out.mutable_data();
    for (int64_t k = 0; k < c; ++k) {
        for (int64_t y = 0; y < oh; ++y) {
            for (int64_t xx = 0; xx < ow; ++xx) {
                const int64_t base = (k * h + 2 * y) * w + 2 * xx;
                const float a = xp[static_cast<size_t>(base)], b = xp[static_cast<size_t>(base + 1)];
                const float cc = xp[static_cast<size_t>(base + w)], d = xp[static_cast<size_t>(base + w + 1)];
                op[static_cast<size_t>((k * oh + y) * ow + xx)] = 0.5f * (s[0] * a + s[1] * b + s[2] * cc + s[3] * d);
            }
        }
    }
    count_op(0);
    if (Tape* tape = recording_tape({&x})) {
        tape->record(out, [x, band, c, h, w, oh, ow](std::span<const float> g) mutable {
            const auto& s = kHaar[static_cast<size_t>(band)];
            auto gx = x.grad_buffer();
            for (int64_t k = 0; k < c; ++k) {
                for (int64_t y = 0; y < oh; ++y) {
                    for (int64_t xx = 0; xx < ow; ++xx) {
                        const float gv = 0.5f * g[static_cast<size_t>((k * oh + y) * ow + xx)];
                        const int64_t base = (k * h + 2 * y) * w + 2 * xx;
                        gx[static_cast<size_t>(base)] += s[0] * gv;
                        gx[static_cast<size_t>(base + 1)] += s[1] * gv;
                        gx[static_cast<size_t>(base + w)] += s[2] * gv;
                        gx[static_cast<size_t>(base + w + 1)] += s[3] * gv;
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace

SubBands haar_decompose(const Tensor& x) {
    if (x.rank() != 3 || x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
        throw DimensionError("haar_decompose: expected [C, H, W] with even H and W, got " + shape_str(x.shape()));
    }
    return {analysis_band(x, 0), analysis_band(x, 1), analysis_band(x, 2), analysis_band(x, 3)};
}

Tensor haar_reconstruct(const SubBands& bands) {
    const std::array<const Tensor*, 4> in = {&bands.ll, &bands.lh, &bands.hl, &bands.hh};
    for (const Tensor* t : in) {
        if (!t->defined() || t->rank() != 3 || t->shape() != bands.ll.shape()) {
            throw DimensionError("haar_reconstruct: sub-bands must share one [C, H, W] shape");
        }
    }
    const int64_t c = bands.ll.dim(0), oh = bands.ll.dim(1), ow = bands.ll.dim(2);
    const int64_t h = 2 * oh, w = 2 * ow;
    Tensor out({c, h, w});
    auto op = out.mutable_data();
    const std::array<std::span<const float>, 4> src = {bands.ll.data(), bands.lh.data(), bands.hl.data(),
                                                       bands.hh.data()};
    for (int64_t k = 0; k < c; ++k) {
        for (int64_t y = 0; y < oh; ++y) {
            for (int64_t xx = 0; xx < ow; ++xx) {
                const size_t i = static_cast<size_t>((k * oh + y) * ow + xx);
                const int64_t base = (k * h + 2 * y) * w + 2 * xx;
                const std::array<int64_t, 4> dst = {base, base + 1, base + w, base + w + 1};
                for (size_t p = 0; p < 4; ++p) {
                    float v = 0.f;
                    for (size_t bnd = 0; bnd < 4; ++bnd) v += kHaar[bnd][p] * src[bnd][i];
                    op[static_cast<size_t>(dst[p])] = 0.5f * v;
                }
            }
        }
    }
    count_op(0);
    if (Tape* tape = recording_tape({in[0], in[1], in[2], in[3]})) {
        tape->record(out, [bands, c, h, w, oh, ow](std::span<const float> g) mutable {
            const std::array<const Tensor*, 4> dst = {&bands.ll, &bands.lh, &bands.hl, &bands.hh};
            for (size_t bnd = 0; bnd < 4; ++bnd) {
                if (!dst[bnd]->requires_grad()) continue;
                auto gb = dst[bnd]->grad_buffer();
                const auto& s = kHaar[bnd];
                for (int64_t k = 0; k < c; ++k) {
                    for (int64_t y = 0; y < oh; ++y) {
                        for (int64_t xx = 0; xx < ow; ++xx) {
                            const int64_t base = (k * h + 2 * y) * w + 2 * xx;
                            const float v = s[0] * g[static_cast<size_t>(base)] + s[1] * g[static_cast<size_t>(base + 1)] +
                                            s[2] * g[static_cast<size_t>(base + w)] +
                                            s[3] * g[static_cast<size_t>(base + w + 1)];
                            gb[static_cast<size_t>((k * oh + y) * ow + xx)] += 0.5f * v;
                        }
                    }
                }
            }
        });
    }
    return out;
}

WaveletPyramid pyramid_decompose(const Tensor& x, int depth) {
    if (depth < 0) throw DimensionError("pyramid_decompose: negative depth");
    if (x.rank() != 3) throw DimensionError("pyramid_decompose: expected [C, H, W], got " + shape_str(x.shape()));
    const int64_t unit = int64_t{1} << depth;
    if (x.dim(1) % unit != 0 || x.dim(2) % unit != 0) {
        throw DimensionError("pyramid_decompose: extents of " + shape_str(x.shape()) + " not divisible by 2^" +
                             std::to_string(depth));
    }
    WaveletPyramid p;
    Tensor current = x;
    for (int level = 0; level < depth; ++level) {
        SubBands s = haar_decompose(current);
        p.levels.push_back({s.lh, s.hl, s.hh});
        current = s.ll;
    }
    p.base_ll = current;
    return p;
}

Tensor pyramid_reconstruct(const WaveletPyramid& pyramid) {
    Tensor current = pyramid.base_ll;
    for (auto it = pyramid.levels.rbegin(); it != pyramid.levels.rend(); ++it) {
        current = haar_reconstruct({current, it->lh, it->hl, it->hh});
    }
    return current;
}

}  // namespace drnet
