// SPDX-License-Identifier: Apache-2.0

#include "drnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "drnet/image.hpp"

namespace drnet {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

void check_pair(const Tensor& a, const Tensor& b, const char* who) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(who) + ": shapes differ, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

std::array<double, kWindow> gaussian() {
    std::array<double, kWindow> g{};
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        g[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        total += g[static_cast<size_t>(i)];
    }
    for (double& v : g) v /= total;
    return g;
}

// Separable valid-mode filter of an [H, W] plane.
std::vector<double> filter(const std::vector<double>& src, int64_t h, int64_t w) {
    static const auto g = gaussian();
    const int64_t oh = h - kWindow + 1, ow = w - kWindow + 1;
    std::vector<double> rows(static_cast<size_t>(h * ow));
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += g[static_cast<size_t>(k)] * src[static_cast<size_t>(y * w + x + k)];
            rows[static_cast<size_t>(y * ow + x)] = s;
        }
    }
    std::vector<double> out(static_cast<size_t>(oh * ow));
    for (int64_t y = 0; y < oh; ++y) {
        for (int64_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWindow; ++k) s += g[static_cast<size_t>(k)] * rows[static_cast<size_t>((y + k) * ow + x)];
            out[static_cast<size_t>(y * ow + x)] = s;
        }
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double peak) {
    check_pair(a, b, "psnr");
    auto x = a.data();
    auto y = b.data();
    double se = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(x.size());
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Tensor& a, const Tensor& b) {
    check_pair(a, b, "ssim");
    if (a.rank() != 3) throw DimensionError("ssim: expected [C, H, W], got " + shape_str(a.shape()));
    const int64_t h = a.dim(1), w = a.dim(2);
    if (h < kWindow || w < kWindow) {
        throw DimensionError("ssim: images must be at least " + std::to_string(kWindow) + " pixels on each side");
    }
    const Tensor ga = to_gray(a), gb = to_gray(b);
    const size_t n = static_cast<size_t>(h * w);
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (size_t i = 0; i < n; ++i) {
        x[i] = ga.data()[i];
        y[i] = gb.data()[i];
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x, h, w), my = filter(y, h, w);
    const auto sxx = filter(xx, h, w), syy = filter(yy, h, w), sxy = filter(xy, h, w);
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double total = 0.0;
    for (size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
        total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

double MetricsReport::mean_psnr() const { return mean_of(psnr); }
double MetricsReport::mean_ssim() const { return mean_of(ssim); }

void MetricsReport::add(const Tensor& test, const Tensor& reference) {
    psnr.push_back(drnet::psnr(test, reference));
    ssim.push_back(drnet::ssim(test, reference));
}

}  // namespace drnet
