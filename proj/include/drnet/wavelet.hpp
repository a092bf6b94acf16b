// SPDX-License-Identifier: Apache-2.0
//
// Orthonormal 2-D Haar transform on [C, H, W] feature maps.
//
// For each 2x2 block [[a, b], [c, d]]:
//   ll = (a + b + c + d) / 2    lh = (a + b - c - d) / 2   (row difference, vertical detail)
//   hl = (a - b + c - d) / 2    hh = (a - b - c + d) / 2   (column difference, horizontal detail)

#pragma once

#include <vector>

#include "drnet/tensor.hpp"

namespace drnet {

struct SubBands {
    Tensor ll, lh, hl, hh;
};

/// High-frequency triple kept at one decomposition level.
struct DetailBands {
    Tensor lh, hl, hh;
};

struct WaveletPyramid {
    /// Shallow to deep; level k has extents H / 2^(k+1).
    std::vector<DetailBands> levels;
    Tensor base_ll;
};

SubBands haar_decompose(const Tensor& x);
Tensor haar_reconstruct(const SubBands& bands);

WaveletPyramid pyramid_decompose(const Tensor& x, int depth);
Tensor pyramid_reconstruct(const WaveletPyramid& pyramid);

}  // namespace drnet
