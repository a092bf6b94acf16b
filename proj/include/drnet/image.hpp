// SPDX-License-Identifier: Apache-2.0
//
// Binary 8-bit PPM (P6) and PGM (P5) images mapped to [0, 1].
#pragma once

#include <filesystem>
#include <string>

#include "drnet/tensor.hpp"

namespace drnet {

/// Returns [3, H, W] for P6 and [1, H, W] for P5. Throws FormatError.
Tensor decode_pnm(const std::string& bytes);
/// [3, H, W] encodes as P6, [1, H, W] as P5. Values are clamped and rounded.
std::string encode_pnm(const Tensor& image);

Tensor read_image(const std::filesystem::path& path);
void write_image(const Tensor& image, const std::filesystem::path& path);

/// Gray [1, H, W] is replicated to three channels; [3, H, W] is returned as is.
Tensor to_rgb(const Tensor& image);
/// Channel mean, [C, H, W] -> [1, H, W].
Tensor to_gray(const Tensor& image);

}  // namespace drnet
