// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "drnet/tensor.hpp"

namespace drnet {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(peak^2 / MSE), capped at kPsnrCap.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

/// Mean local SSIM on the channel-mean gray image: 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1, valid positions only.
double ssim(const Tensor& a, const Tensor& b);

struct MetricsReport {
    std::vector<double> psnr;
    std::vector<double> ssim;
    double mean_psnr() const;
    double mean_ssim() const;
    void add(const Tensor& test, const Tensor& reference);
};

}  // namespace drnet
