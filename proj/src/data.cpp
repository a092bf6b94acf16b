// SPDX-License-Identifier: Apache-2.0

#include "drnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "drnet/kv.hpp"

namespace drnet {

namespace {

constexpr std::array<double, 3> kNoiseLevels = {15.0, 25.0, 50.0};

double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

void clamp_unit(Tensor& t) {
    for (float& v : t.mutable_data()) v = std::clamp(v, 0.0f, 1.0f);
}

Tensor box_blur(const Tensor& x, int k) {
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int64_t r = k / 2;
    Tensor out(x.shape());
    auto src = x.data();
    auto dst = out.mutable_data();
    const double norm = 1.0 / static_cast<double>(k * k);
    // Edge pixels replicate, so every output is a proper average of k*k samples.
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t xx = 0; xx < w; ++xx) {
                double s = 0.0;
                for (int64_t dy = -r; dy <= r; ++dy) {
                    const int64_t sy = std::clamp<int64_t>(y + dy, 0, h - 1);
                    for (int64_t dx = -r; dx <= r; ++dx) {
                        const int64_t sx = std::clamp<int64_t>(xx + dx, 0, w - 1);
                        s += src[static_cast<size_t>((ch * h + sy) * w + sx)];
                    }
                }
                dst[static_cast<size_t>((ch * h + y) * w + xx)] = static_cast<float>(s * norm);
            }
        }
    }
    return out;
}

Tensor add_rain(const Tensor& x, int lines, Rng& rng) {
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    std::vector<float> streak(static_cast<size_t>(h * w), 0.0f);
    const double lo = std::max(2.0, static_cast<double>(h) / 4.0), hi = std::max(lo, static_cast<double>(h) / 2.0);
    for (int i = 0; i < lines; ++i) {
        const double angle = uniform_real(rng, 70.0, 110.0) * std::numbers::pi / 180.0;
        const double intensity = uniform_real(rng, 0.2, 0.5);
        const double length = uniform_real(rng, lo, hi);
        const double x0 = uniform_real(rng, 0.0, static_cast<double>(w));
        const double y0 = uniform_real(rng, 0.0, static_cast<double>(h));
        const double ux = std::cos(angle), uy = std::sin(angle);
        for (double s = 0.0; s <= length; s += 0.5) {
            const auto px = static_cast<int64_t>(std::floor(x0 + s * ux));
            const auto py = static_cast<int64_t>(std::floor(y0 + s * uy));
            if (px < 0 || py < 0 || px >= w || py >= h) continue;
            float& v = streak[static_cast<size_t>(py * w + px)];
            v = std::max(v, static_cast<float>(intensity));
        }
    }
    Tensor out = x.detach();
    auto d = out.mutable_data();
    for (int64_t ch = 0; ch < c; ++ch) {
        for (int64_t i = 0; i < h * w; ++i) d[static_cast<size_t>(ch * h * w + i)] += streak[static_cast<size_t>(i)];
    }
    return out;
}

}  // namespace

TaskSpec task_spec(std::string_view name) { return {std::string(name), TaskPrior::for_task(name)}; }

std::vector<std::string> specific_tasks() {
    std::vector<std::string> out;
    for (std::string_view n : kTaskNames) {
        if (n != "blind") out.emplace_back(n);
    }
    return out;
}

std::vector<std::string> parse_task_list(std::string_view text) {
    std::vector<std::string> out;
    for (const std::string& t : split(text, ',')) {
        if (t.empty()) throw ContractError("task list has an empty entry: '" + std::string(text) + "'");
        task_index(t);
        out.push_back(t);
    }
    if (out.empty()) throw ContractError("task list is empty");
    return out;
}

Degradation sample_degradation(std::string_view task, Rng& rng) {
    task_index(task);
    std::string kind(task);
    if (kind == "blind") {
        const auto tasks = specific_tasks();
        kind = tasks[static_cast<size_t>(uniform_int(rng, 0, static_cast<int>(tasks.size()) - 1))];
    }
    Degradation d;
    d.kind = kind;
    if (kind == "denoise") {
        d.sigma = kNoiseLevels[static_cast<size_t>(uniform_int(rng, 0, 2))] / 255.0;
    } else if (kind == "derain") {
        d.rain_lines = uniform_int(rng, 5, 20);
    } else if (kind == "dehaze") {
        d.transmission = uniform_real(rng, 0.3, 0.8);
        d.airlight = uniform_real(rng, 0.7, 1.0);
    } else if (kind == "deblur") {
        d.kernel = uniform_int(rng, 0, 1) == 0 ? 3 : 5;
    } else {
        d.gamma = uniform_real(rng, 2.0, 3.0);
        d.gain = uniform_real(rng, 0.1, 0.4);
    }
    return d;
}

Tensor apply_degradation(const Tensor& x, const Degradation& d, Rng& rng) {
    if (x.rank() != 3) throw DimensionError("degrade: expected [C, H, W], got " + shape_str(x.shape()));
    Tensor out;
    if (d.kind == "denoise") {
        out = x.detach();
        std::normal_distribution<double> noise(0.0, d.sigma);
        for (float& v : out.mutable_data()) v += static_cast<float>(noise(rng));
    } else if (d.kind == "derain") {
        out = add_rain(x, d.rain_lines, rng);
    } else if (d.kind == "dehaze") {
        out = x.detach();
        const double t = d.transmission, a = d.airlight * (1.0 - d.transmission);
        for (float& v : out.mutable_data()) v = static_cast<float>(v * t + a);
    } else if (d.kind == "deblur") {
        if (d.kernel < 1 || d.kernel % 2 == 0) throw ContractError("deblur kernel must be odd and positive");
        out = d.kernel == 1 ? x.detach() : box_blur(x, d.kernel);
    } else if (d.kind == "enhance") {
        out = x.detach();
        for (float& v : out.mutable_data()) {
            v = static_cast<float>(d.gain * std::pow(std::max(0.0, static_cast<double>(v)), d.gamma));
        }
    } else {
        throw ContractError("unknown degradation '" + d.kind + "'");
    }
    clamp_unit(out);
    return out;
}

Tensor degrade(const Tensor& x, std::string_view task, uint64_t seed) {
    Rng rng(seed);
    const Degradation d = sample_degradation(task, rng);
    return apply_degradation(x, d, rng);
}

Tensor synth_clean(uint64_t seed, int64_t height, int64_t width) {
    if (height <= 0 || width <= 0) throw DimensionError("synth_clean: extents must be positive");
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    Tensor img({3, height, width});
    auto d = img.mutable_data();
    const int64_t plane = height * width;
    auto px = [&](int64_t c, int64_t y, int64_t x) -> float& {
        return d[static_cast<size_t>(c * plane + y * width + x)];
    };

    // Linear colour gradient between two random colours.
    const double angle = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
    const double gx = std::cos(angle), gy = std::sin(angle);
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = uniform_real(rng, 0.1, 0.9);
        c1[c] = uniform_real(rng, 0.1, 0.9);
    }
    const double span = std::abs(gx) * static_cast<double>(width) + std::abs(gy) * static_cast<double>(height);
    const double offset = std::min(0.0, gx) * static_cast<double>(width) + std::min(0.0, gy) * static_cast<double>(height);
    for (int64_t y = 0; y < height; ++y) {
        for (int64_t x = 0; x < width; ++x) {
            const double t = span > 0 ? (gx * static_cast<double>(x) + gy * static_cast<double>(y) - offset) / span : 0.0;
            for (int c = 0; c < 3; ++c) px(c, y, x) = static_cast<float>(c0[c] + (c1[c] - c0[c]) * t);
        }
    }

    const int shapes = uniform_int(rng, 3, 8);
    for (int s = 0; s < shapes; ++s) {
        double colour[3];
        for (double& v : colour) v = uniform_real(rng, 0.0, 1.0);
        const double cx = uniform_real(rng, 0.0, static_cast<double>(width));
        const double cy = uniform_real(rng, 0.0, static_cast<double>(height));
        const double rx = uniform_real(rng, 0.05, 0.3) * static_cast<double>(width);
        const double ry = uniform_real(rng, 0.05, 0.3) * static_cast<double>(height);
        const bool disk = uniform_int(rng, 0, 1) == 1;
        for (int64_t y = 0; y < height; ++y) {
            for (int64_t x = 0; x < width; ++x) {
                const double dx = (static_cast<double>(x) - cx) / rx, dy = (static_cast<double>(y) - cy) / ry;
                const bool inside = disk ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
                if (!inside) continue;
                for (int c = 0; c < 3; ++c) px(c, y, x) = static_cast<float>(colour[c]);
            }
        }
    }

    // Checkerboard patch.
    const int64_t cell = std::max<int64_t>(1, std::min(height, width) / uniform_int(rng, 6, 12));
    const int64_t pw = std::max<int64_t>(1, width / 3), ph = std::max<int64_t>(1, height / 3);
    const int64_t x0 = std::uniform_int_distribution<int64_t>(0, width - pw)(rng);
    const int64_t y0 = std::uniform_int_distribution<int64_t>(0, height - ph)(rng);
    const double lo = uniform_real(rng, 0.0, 0.4), hi = uniform_real(rng, 0.6, 1.0);
    for (int64_t y = y0; y < y0 + ph; ++y) {
        for (int64_t x = x0; x < x0 + pw; ++x) {
            const bool on = (((y - y0) / cell) + ((x - x0) / cell)) % 2 == 0;
            for (int c = 0; c < 3; ++c) px(c, y, x) = static_cast<float>(on ? hi : lo);
        }
    }
    clamp_unit(img);
    return img;
}

TestSet make_test_set(std::string_view task, int count, int64_t size, uint64_t seed) {
    TestSet set;
    set.task = std::string(task);
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        const uint64_t image_seed = rng(), degrade_seed = rng();
        Tensor clean = synth_clean(image_seed, size, size);
        set.degraded.push_back(degrade(clean, task, degrade_seed));
        set.clean.push_back(std::move(clean));
    }
    return set;
}

}  // namespace drnet
