// SPDX-License-Identifier: Apache-2.0

#include "drnet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace drnet {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::string& bytes, size_t& pos) {
    while (pos < bytes.size()) {
        const auto c = static_cast<unsigned char>(bytes[pos]);
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (std::isspace(c)) {
            ++pos;
        } else {
            break;
        }
    }
    const size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError("image header truncated");
    return bytes.substr(start, pos - start);
}

int64_t header_int(const std::string& bytes, size_t& pos, const char* what) {
    const std::string tok = next_token(bytes, pos);
    if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
        tok.size() > 9) {
        throw FormatError(std::string("image header: bad ") + what + " '" + tok + "'");
    }
    return std::stoll(tok);
}

}  // namespace

Tensor decode_pnm(const std::string& bytes) {
    size_t pos = 0;
    const std::string magic = next_token(bytes, pos);
    int64_t channels = 0;
    if (magic == "P6") {
        channels = 3;
    } else if (magic == "P5") {
        channels = 1;
    } else {
        throw FormatError("unsupported image format '" + magic + "' (expected binary P6 or P5)");
    }
    const int64_t width = header_int(bytes, pos, "width");
    const int64_t height = header_int(bytes, pos, "height");
    const int64_t maxval = header_int(bytes, pos, "maxval");
    if (width <= 0 || height <= 0) throw FormatError("image has zero extent");
    if (maxval <= 0 || maxval > 255) throw FormatError("only 8-bit images are supported (maxval " + std::to_string(maxval) + ")");
    if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        throw FormatError("image header not terminated");
    }
    ++pos;
    const int64_t n = channels * width * height;
    if (static_cast<int64_t>(bytes.size() - pos) < n) {
        throw FormatError("image payload truncated: " + std::to_string(bytes.size() - pos) + " of " +
                          std::to_string(n) + " bytes");
    }
    Tensor out({channels, height, width});
    auto d = out.mutable_data();
    const auto scale = static_cast<float>(maxval);
    for (int64_t y = 0; y < height; ++y) {
        for (int64_t x = 0; x < width; ++x) {
            for (int64_t c = 0; c < channels; ++c) {
                const auto v = static_cast<unsigned char>(bytes[pos + static_cast<size_t>((y * width + x) * channels + c)]);
                d[static_cast<size_t>((c * height + y) * width + x)] = std::min(1.0f, static_cast<float>(v) / scale);
            }
        }
    }
    return out;
}

std::string encode_pnm(const Tensor& image) {
    if (image.rank() != 3 || (image.dim(0) != 3 && image.dim(0) != 1)) {
        throw DimensionError("encode_pnm: expected [3, H, W] or [1, H, W], got " + shape_str(image.shape()));
    }
    const int64_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
    std::ostringstream head;
    head << (channels == 3 ? "P6" : "P5") << '\n' << width << ' ' << height << "\n255\n";
    std::string out = head.str();
    const size_t start = out.size();
    out.resize(start + static_cast<size_t>(channels * height * width));
    auto d = image.data();
    for (int64_t y = 0; y < height; ++y) {
        for (int64_t x = 0; x < width; ++x) {
            for (int64_t c = 0; c < channels; ++c) {
                float v = d[static_cast<size_t>((c * height + y) * width + x)];
                v = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
                out[start + static_cast<size_t>((y * width + x) * channels + c)] =
                    static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
            }
        }
    }
    return out;
}

Tensor read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open image '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return decode_pnm(ss.str());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_image(const Tensor& image, const std::filesystem::path& path) {
    const std::string bytes = encode_pnm(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write image '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing image '" + path.string() + "'");
}

Tensor to_rgb(const Tensor& image) {
    if (image.rank() != 3) throw DimensionError("to_rgb: expected [C, H, W], got " + shape_str(image.shape()));
    if (image.dim(0) == 3) return image;
    if (image.dim(0) != 1) throw DimensionError("to_rgb: expected 1 or 3 channels, got " + shape_str(image.shape()));
    const int64_t plane = image.dim(1) * image.dim(2);
    Tensor out({3, image.dim(1), image.dim(2)});
    auto src = image.data();
    auto dst = out.mutable_data();
    for (int64_t c = 0; c < 3; ++c) std::copy(src.begin(), src.end(), dst.begin() + c * plane);
    return out;
}

Tensor to_gray(const Tensor& image) {
    if (image.rank() != 3) throw DimensionError("to_gray: expected [C, H, W], got " + shape_str(image.shape()));
    const int64_t channels = image.dim(0), plane = image.dim(1) * image.dim(2);
    Tensor out({1, image.dim(1), image.dim(2)});
    auto src = image.data();
    auto dst = out.mutable_data();
    for (int64_t i = 0; i < plane; ++i) {
        double s = 0.0;
        for (int64_t c = 0; c < channels; ++c) s += src[static_cast<size_t>(c * plane + i)];
        dst[static_cast<size_t>(i)] = static_cast<float>(s / static_cast<double>(channels));
    }
    return out;
}

}  // namespace drnet
