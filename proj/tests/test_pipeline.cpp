// SPDX-License-Identifier: Apache-2.0

#include "drnet/pipeline.hpp"

#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "drnet/data.hpp"
#include "drnet/image.hpp"
#include "drnet/metrics.hpp"
#include "support.hpp"

using namespace drnet;
using namespace drnet::test;

namespace {

Tensor constant_image(int64_t h, int64_t w, float v) { return Tensor::full({3, h, w}, v); }

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end(),
                                                [](float x, float y) { return std::bit_cast<uint32_t>(x) == std::bit_cast<uint32_t>(y); });
}

// Direct windowed SSIM: 11x11 Gaussian (sigma 1.5) over every valid window of
// the channel-mean images.
double ssim_oracle(const Tensor& a, const Tensor& b) {
    const int64_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
    auto gray = [&](const Tensor& t, int64_t y, int64_t x) {
        double s = 0.0;
        for (int64_t k = 0; k < c; ++k) s += t.data()[static_cast<size_t>((k * h + y) * w + x)];
        return s / static_cast<double>(c);
    };
    double g[11][11], gs = 0.0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) gs += (g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5)));
    double total = 0.0;
    int64_t count = 0;
    for (int64_t y0 = 0; y0 + 11 <= h; ++y0)
        for (int64_t x0 = 0; x0 + 11 <= w; ++x0) {
            double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double wt = g[i][j] / gs, p = gray(a, y0 + i, x0 + j), q = gray(b, y0 + i, x0 + j);
                    mx += wt * p;
                    my += wt * q;
                    sxx += wt * p * p;
                    syy += wt * q * q;
                    sxy += wt * p * q;
                }
            const double c1 = 1e-4, c2 = 9e-4;
            total += (2 * mx * my + c1) * (2 * (sxy - mx * my) + c2) /
                     ((mx * mx + my * my + c1) * (sxx - mx * mx + syy - my * my + c2));
            ++count;
        }
    return total / static_cast<double>(count);
}

// Replicate-edge k x k box blur.
std::vector<double> box_oracle(const Tensor& x, int k) {
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2), r = k / 2;
    std::vector<double> out(static_cast<size_t>(x.numel()));
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < h; ++y)
            for (int64_t xx = 0; xx < w; ++xx) {
                double s = 0.0;
                for (int64_t dy = -r; dy <= r; ++dy)
                    for (int64_t dx = -r; dx <= r; ++dx) {
                        const int64_t sy = std::clamp(y + dy, int64_t{0}, h - 1), sx = std::clamp(xx + dx, int64_t{0}, w - 1);
                        s += x.data()[static_cast<size_t>((ch * h + sy) * w + sx)];
                    }
                out[static_cast<size_t>((ch * h + y) * w + xx)] = s / (k * k);
            }
    return out;
}

DRNet tiny(uint64_t seed) { return build(DRNetConfig::tiny(), seed); }

TrainConfig quick_config(int64_t steps) {
    TrainConfig tc;
    tc.steps = steps;
    tc.seed = 3;
    return tc;
}

}  // namespace

TEST_SUITE("tasks") {
    TEST_CASE("names map to fixed prior slots") {
        const std::vector<std::string> names = {"denoise", "derain", "dehaze", "deblur", "enhance", "blind"};
        for (size_t i = 0; i < names.size(); ++i) CHECK(task_spec(names[i]).prior.index() == static_cast<int>(i));
        CHECK(specific_tasks() == std::vector<std::string>(names.begin(), names.end() - 1));
        CHECK_THROWS_AS(task_spec("upscale"), ContractError);
    }
    TEST_CASE("task lists") {
        CHECK(parse_task_list("denoise,dehaze") == std::vector<std::string>{"denoise", "dehaze"});
        CHECK(parse_task_list(" derain , blind ") == std::vector<std::string>{"derain", "blind"});
        CHECK_THROWS_AS(parse_task_list(""), ContractError);
        CHECK_THROWS_AS(parse_task_list("denoise,,dehaze"), ContractError);
        CHECK_THROWS_AS(parse_task_list("denoise,colorize"), ContractError);
    }
}

TEST_SUITE("synthesis") {
    TEST_CASE("clean scenes are deterministic, bounded and seed dependent") {
        Tensor a = synth_clean(5, 48, 40), b = synth_clean(5, 48, 40), c = synth_clean(6, 48, 40);
        CHECK(a.shape() == Shape{3, 48, 40});
        CHECK(bitwise_equal(a, b));
        CHECK_FALSE(bitwise_equal(a, c));
        for (float v : a.data()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
    TEST_CASE("sampled parameters stay in their ranges") {
        Rng rng(1);
        std::map<std::string, int> blind_kinds;
        for (int i = 0; i < 300; ++i) {
            const Degradation n = sample_degradation("denoise", rng);
            const double s = n.sigma * 255.0;
            CHECK((std::abs(s - 15) < 1e-9 || std::abs(s - 25) < 1e-9 || std::abs(s - 50) < 1e-9));
            const Degradation r = sample_degradation("derain", rng);
            CHECK(r.rain_lines >= 5);
            CHECK(r.rain_lines <= 20);
            const Degradation h = sample_degradation("dehaze", rng);
            CHECK(h.transmission >= 0.3);
            CHECK(h.transmission <= 0.8);
            CHECK(h.airlight >= 0.7);
            CHECK(h.airlight <= 1.0);
            const Degradation b = sample_degradation("deblur", rng);
            CHECK((b.kernel == 3 || b.kernel == 5));
            const Degradation e = sample_degradation("enhance", rng);
            CHECK(e.gamma >= 2.0);
            CHECK(e.gamma <= 3.0);
            CHECK(e.gain >= 0.1);
            CHECK(e.gain <= 0.4);
            ++blind_kinds[sample_degradation("blind", rng).kind];
        }
        CHECK(blind_kinds.size() == 5);
        for (const auto& [kind, count] : blind_kinds) CHECK(count > 30);
        CHECK_THROWS_AS(sample_degradation("colorize", rng), ContractError);
    }
    TEST_CASE("noise at sigma 25 has the expected variance") {
        Rng rng(2);
        Tensor x = constant_image(64, 64, 0.5f);
        Degradation d;
        d.kind = "denoise";
        d.sigma = 25.0 / 255.0;
        Tensor y = apply_degradation(x, d, rng);
        double s = 0.0, s2 = 0.0;
        const double n = static_cast<double>(y.numel());
        for (size_t i = 0; i < y.data().size(); ++i) {
            const double e = static_cast<double>(y.data()[i]) - x.data()[i];
            s += e;
            s2 += e * e;
        }
        const double var = s2 / n - (s / n) * (s / n), expected = d.sigma * d.sigma;
        INFO("variance " << var << " expected " << expected << " over " << n << " pixels");
        CHECK(n >= 1e4);
        CHECK(std::abs(var - expected) <= 0.1 * expected);
    }
    TEST_CASE("identity settings leave the image unchanged") {
        Rng rng(3);
        Tensor x = synth_clean(7, 32, 32);
        Degradation haze;
        haze.kind = "dehaze";
        haze.transmission = 1.0;
        haze.airlight = 0.8;
        CHECK(max_abs_diff(apply_degradation(x, haze, rng).data(), x.data()) <= 1e-7);
        Degradation light;
        light.kind = "enhance";
        CHECK(max_abs_diff(apply_degradation(x, light, rng).data(), x.data()) <= 1e-7);
        Degradation blur;
        blur.kind = "deblur";
        CHECK(max_abs_diff(apply_degradation(x, blur, rng).data(), x.data()) <= 1e-7);
    }
    TEST_CASE("haze and darkening follow their closed forms") {
        Rng rng(4);
        Tensor x = synth_clean(8, 16, 16);
        Degradation haze;
        haze.kind = "dehaze";
        haze.transmission = 0.4;
        haze.airlight = 0.9;
        Tensor y = apply_degradation(x, haze, rng);
        Degradation dark;
        dark.kind = "enhance";
        dark.gamma = 2.5;
        dark.gain = 0.3;
        Tensor z = apply_degradation(x, dark, rng);
        for (size_t i = 0; i < x.data().size(); ++i) {
            const double v = x.data()[i];
            CHECK(y.data()[i] == doctest::Approx(v * 0.4 + 0.9 * 0.6).epsilon(1e-6));
            CHECK(z.data()[i] == doctest::Approx(0.3 * std::pow(v, 2.5)).epsilon(1e-5));
        }
    }
    TEST_CASE("blur matches a replicate-edge box filter") {
        Rng rng(5);
        Tensor x = synth_clean(9, 20, 24);
        for (int k : {3, 5}) {
            Degradation d;
            d.kind = "deblur";
            d.kernel = k;
            CHECK(max_abs_diff(apply_degradation(x, d, rng), box_oracle(x, k)) <= 1e-6);
        }
    }
    TEST_CASE("rain only brightens") {
        Rng rng(6);
        Tensor x = synth_clean(10, 32, 32);
        Degradation d;
        d.kind = "derain";
        d.rain_lines = 12;
        Tensor y = apply_degradation(x, d, rng);
        int changed = 0;
        for (size_t i = 0; i < x.data().size(); ++i) {
            CHECK(y.data()[i] >= x.data()[i]);
            changed += y.data()[i] != x.data()[i];
        }
        CHECK(changed > 0);
    }
    TEST_CASE("every task stays in [0, 1] and is seed deterministic") {
        Tensor x = synth_clean(11, 32, 32);
        for (const char* task : {"denoise", "derain", "dehaze", "deblur", "enhance", "blind"}) {
            Tensor y = degrade(x, task, 42);
            CHECK(bitwise_equal(y, degrade(x, task, 42)));
            for (float v : y.data()) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }
        CHECK_THROWS_AS(degrade(x, "colorize", 1), ContractError);
    }
    TEST_CASE("test sets are reproducible") {
        TestSet a = make_test_set("dehaze", 4, 32, 9), b = make_test_set("dehaze", 4, 32, 9);
        REQUIRE(a.clean.size() == 4);
        REQUIRE(a.degraded.size() == 4);
        for (size_t i = 0; i < 4; ++i) {
            CHECK(bitwise_equal(a.clean[i], b.clean[i]));
            CHECK(bitwise_equal(a.degraded[i], b.degraded[i]));
        }
    }
}

TEST_SUITE("metrics") {
    TEST_CASE("psnr closed forms") {
        Tensor a = synth_clean(1, 16, 16);
        CHECK(psnr(a, a) == kPsnrCap);
        Tensor b = constant_image(16, 16, 0.3f), c = constant_image(16, 16, 0.4f);
        CHECK(psnr(b, c) == doctest::Approx(20.0).epsilon(1e-5));
        CHECK(psnr(c, b) == psnr(b, c));
        CHECK(psnr(b, c, 255.0) == doctest::Approx(20.0 + 20.0 * std::log10(255.0)).epsilon(1e-5));
        CHECK_THROWS_AS(psnr(b, Tensor::zeros({3, 16, 15})), DimensionError);
    }
    TEST_CASE("ssim closed forms and oracle") {
        Tensor a = synth_clean(2, 24, 24);
        CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
        Tensor bin({3, 16, 16}), inv({3, 16, 16});
        for (int64_t i = 0; i < bin.numel(); ++i) {
            const float v = ((i / 16) / 3 + (i % 16) / 3) % 2 ? 1.0f : 0.0f;
            bin.mutable_data()[static_cast<size_t>(i)] = v;
            inv.mutable_data()[static_cast<size_t>(i)] = 1.0f - v;
        }
        CHECK(ssim(bin, inv) < 0.0);
        CHECK(ssim(bin, inv) == doctest::Approx(ssim_oracle(bin, inv)).epsilon(1e-9));
        for (uint64_t seed = 0; seed < 5; ++seed) {
            Tensor p = synth_clean(seed, 20, 17), q = degrade(p, "denoise", seed);
            CHECK(ssim(p, q) == doctest::Approx(ssim(q, p)).epsilon(1e-12));
            // The library averages channels in float32 before filtering.
            CHECK(std::abs(ssim(p, q) - ssim_oracle(p, q)) <= 1e-6);
        }
        CHECK_THROWS_AS(ssim(Tensor::zeros({3, 10, 20}), Tensor::zeros({3, 10, 20})), DimensionError);
    }
    TEST_CASE("both metrics fall as noise grows") {
        int monotone = 0;
        for (uint64_t seed = 0; seed < 10; ++seed) {
            Tensor clean = synth_clean(seed, 32, 32);
            double last_p = kPsnrCap + 1, last_s = 2.0;
            bool ok = true;
            for (double sigma : {5.0, 15.0, 30.0, 60.0}) {
                Rng rng(seed);
                Degradation d;
                d.kind = "denoise";
                d.sigma = sigma / 255.0;
                Tensor noisy = apply_degradation(clean, d, rng);
                const double p = psnr(noisy, clean), s = ssim(noisy, clean);
                ok &= p < last_p && s < last_s && p < kPsnrCap && s < 1.0;
                last_p = p;
                last_s = s;
            }
            monotone += ok;
        }
        CHECK(monotone == 10);
    }
    TEST_CASE("report aggregates per image") {
        MetricsReport r;
        Tensor a = constant_image(16, 16, 0.3f), b = constant_image(16, 16, 0.4f);
        r.add(a, b);
        r.add(b, b);
        CHECK(r.psnr.size() == 2);
        CHECK(r.mean_psnr() == doctest::Approx((20.0 + kPsnrCap) / 2).epsilon(1e-6));
        CHECK(r.mean_ssim() <= 1.0);
    }
}

TEST_SUITE("images") {
    TEST_CASE("PPM and PGM round trip 8-bit values exactly") {
        Tensor rgb({3, 5, 7});
        for (int64_t i = 0; i < rgb.numel(); ++i) rgb.mutable_data()[static_cast<size_t>(i)] = static_cast<float>(i % 256) / 255.0f;
        const std::string ppm = encode_pnm(rgb);
        CHECK(ppm.rfind("P6\n7 5\n255\n", 0) == 0);
        CHECK(max_abs_diff(decode_pnm(ppm).data(), rgb.data()) == 0.0);
        Tensor gray = Tensor::full({1, 4, 3}, 128.0f / 255.0f);
        const std::string pgm = encode_pnm(gray);
        CHECK(pgm.rfind("P5", 0) == 0);
        CHECK(decode_pnm(pgm).shape() == Shape{1, 4, 3});
        const auto path = std::filesystem::temp_directory_path() / "drnet_test_image.ppm";
        write_image(rgb, path);
        CHECK(max_abs_diff(read_image(path).data(), rgb.data()) == 0.0);
        std::filesystem::remove(path);
    }
    TEST_CASE("header comments are accepted") {
        const std::string bytes = std::string("P5\n# made by hand\n2 1\n255\n") + '\x00' + '\xff';
        Tensor t = decode_pnm(bytes);
        CHECK(t.at({0, 0, 0}) == 0.0f);
        CHECK(t.at({0, 0, 1}) == 1.0f);
    }
    TEST_CASE("malformed files are format errors") {
        CHECK_THROWS_AS(decode_pnm("P3\n1 1\n255\n0 0 0"), FormatError);
        CHECK_THROWS_AS(decode_pnm("P6\n2 2\n255\nabc"), FormatError);
        CHECK_THROWS_AS(decode_pnm("P6\n2 2\n65535\n"), FormatError);
        CHECK_THROWS_AS(decode_pnm("P6\n0 2\n255\n"), FormatError);
        CHECK_THROWS_AS(decode_pnm(""), FormatError);
        CHECK_THROWS_AS(read_image("/nonexistent/drnet.ppm"), FormatError);
    }
    TEST_CASE("gray and colour conversion") {
        Tensor g = Tensor::full({1, 2, 2}, 0.25f);
        Tensor c = to_rgb(g);
        CHECK(c.shape() == Shape{3, 2, 2});
        CHECK(max_abs_diff(to_gray(c).data(), g.data()) == 0.0);
        CHECK(to_rgb(c).same(c));
    }
}

TEST_SUITE("training") {
    TEST_CASE("cosine schedule endpoints and shape") {
        CHECK(cosine_lr(0, 2000, 2e-4, 1e-6) == doctest::Approx(2e-4).epsilon(1e-12));
        CHECK(cosine_lr(1999, 2000, 2e-4, 1e-6) <= 1e-6 + 1e-12);
        CHECK(cosine_lr(1999, 2000, 2e-4, 1e-6) == doctest::Approx(1e-6));
        double last = 1.0;
        for (int64_t s = 0; s < 100; ++s) {
            const double lr = cosine_lr(s, 100, 1.0, 0.0);
            CHECK(lr <= last);
            CHECK(lr == doctest::Approx(0.5 * (1 + std::cos(std::numbers::pi * s / 99.0))).epsilon(1e-12));
            last = lr;
        }
        CHECK(cosine_lr(0, 1, 2e-4, 1e-6) == doctest::Approx(2e-4));
    }
    TEST_CASE("config parsing and validation") {
        TrainConfig tc = parse_train_config("steps = 10\nlr = 1e-3\nflip = false\nbatch=2\n# done\n");
        CHECK(tc.steps == 10);
        CHECK(tc.lr == doctest::Approx(1e-3));
        CHECK_FALSE(tc.flip);
        CHECK(tc.batch == 2);
        CHECK_THROWS_AS(parse_train_config("window = 4\n"), FormatError);
        CHECK_NOTHROW(parse_train_config("window = 4\n", true));
        CHECK_THROWS_AS(parse_train_config("flip = maybe\n"), FormatError);
        TrainConfig bad;
        bad.batch = 0;
        bad.lr = -1.0;
        CHECK_THROWS_AS(bad.validate(), ContractError);
    }
    TEST_CASE("first Adam step moves each entry by lr against its gradient sign") {
        Tensor p = Tensor::of({3}, {1.0f, -2.0f, 0.5f});
        p.set_requires_grad(true);
        auto g = p.grad_buffer();
        g[0] = 0.3f;
        g[1] = -4.0f;
        g[2] = 0.0f;
        Adam opt({p}, 0.9, 0.999, 1e-8);
        opt.step(0.01);
        CHECK(p.data()[0] == doctest::Approx(0.99).epsilon(1e-6));
        CHECK(p.data()[1] == doctest::Approx(-1.99).epsilon(1e-6));
        CHECK(p.data()[2] == 0.5f);
        CHECK(opt.steps_taken() == 1);
        for (float v : p.grad()) CHECK(v == 0.0f);
    }
    TEST_CASE("Adam minimises a quadratic") {
        Tensor p = Tensor::of({2}, {3.0f, -1.0f});
        p.set_requires_grad(true);
        Adam opt({p}, 0.9, 0.999, 1e-8);
        for (int i = 0; i < 500; ++i) {
            auto g = p.grad_buffer();
            g[0] = 2 * (p.data()[0] - 1.0f);
            g[1] = 2 * (p.data()[1] + 0.5f);
            opt.step(0.05);
        }
        CHECK(p.data()[0] == doctest::Approx(1.0).epsilon(1e-2));
        CHECK(p.data()[1] == doctest::Approx(-0.5).epsilon(1e-2));
    }
    TEST_CASE("zero steps leave parameters unchanged") {
        DRNet m = tiny(1);
        DRNet before = clone(m);
        TrainResult r = train(m, quick_config(0), std::vector<std::string>{"denoise"});
        CHECK(r.trace.empty());
        const auto a = named_parameters(m), b = named_parameters(before);
        for (size_t i = 0; i < a.size(); ++i) CHECK(bitwise_equal(a[i].second, b[i].second));
    }
    TEST_CASE("trace records tasks, losses and the schedule") {
        DRNet m = tiny(2);
        std::vector<TrainStep> seen;
        TrainResult r = train(m, quick_config(6), std::vector<std::string>{"derain", "blind"},
                              [&](const TrainStep& s) { seen.push_back(s); });
        REQUIRE(r.trace.size() == 6);
        CHECK(seen.size() == 6);
        for (size_t i = 0; i < 6; ++i) {
            CHECK(r.trace[i].step == static_cast<int64_t>(i));
            CHECK((r.trace[i].task == "derain" || r.trace[i].task == "blind"));
            CHECK(std::isfinite(r.trace[i].loss));
            CHECK(r.trace[i].lr == doctest::Approx(cosine_lr(static_cast<int64_t>(i), 6, 2e-4, 1e-6)));
        }
        CHECK(r.trace[0].lr == doctest::Approx(2e-4));
        CHECK(r.trace[5].lr <= 1e-6 + 1e-12);
    }
    TEST_CASE("training is deterministic for a seed") {
        DRNet a = tiny(3), b = tiny(3);
        TrainResult ra = train(a, quick_config(3), std::vector<std::string>{"deblur"});
        TrainResult rb = train(b, quick_config(3), std::vector<std::string>{"deblur"});
        for (size_t i = 0; i < 3; ++i) CHECK(ra.trace[i].loss == rb.trace[i].loss);
        const auto na = named_parameters(a), nb = named_parameters(b);
        for (size_t i = 0; i < na.size(); ++i) CHECK(bitwise_equal(na[i].second, nb[i].second));
    }
    TEST_CASE("divergence aborts") {
        DRNet m = tiny(4);
        TrainConfig tc = quick_config(50);
        tc.lr = 1e30;
        tc.lr_min = 1e30;
        CHECK_THROWS_AS(train(m, tc, std::vector<std::string>{"denoise"}), DivergenceError);
    }
    TEST_CASE("bad inputs are rejected") {
        DRNet m = tiny(5);
        CHECK_THROWS_AS(train(m, quick_config(1), std::vector<std::string>{}), ContractError);
        CHECK_THROWS_AS(train(m, quick_config(1), std::vector<std::string>{"colorize"}), ContractError);
    }
    TEST_CASE("500 denoising steps reduce the loss") {
        DRNet m = tiny(6);
        TrainResult r = train(m, quick_config(500), std::vector<std::string>{"denoise"});
        const double first = r.mean_loss(0, 100), last = r.mean_loss(400, 100);
        INFO("first 100 " << first << ", last 100 " << last);
        CHECK(last < first);
    }
}

TEST_SUITE("restoration") {
    TEST_CASE("restore preserves extents, clamps and is deterministic") {
        DRNet m = tiny(7);
        FusedDRNet f = reconfigure(m, TaskPrior::for_task("dehaze"));
        Tensor x = degrade(synth_clean(1, 40, 36), "dehaze", 1);
        Tensor y = restore(f, x);
        CHECK(y.shape() == x.shape());
        for (float v : y.data()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
        CHECK(bitwise_equal(y, restore(f, x)));
        CHECK_THROWS_AS(restore(f, Tensor::zeros({3, 8200, 2})), DimensionError);
    }
    TEST_CASE("sequential restoration chains fused specialists") {
        DRNet m = tiny(8);
        Rng rng(8);
        for (DRMLPParams& p : m.mlps)
            for (TsmHead* h : {&p.tsm.bank1, &p.tsm.bank2})
                if (h->logits.weight.defined()) h->logits.weight = random_tensor(h->logits.weight.shape(), rng, 2.0f);
        Tensor x = degrade(degrade(synth_clean(2, 32, 32), "denoise", 3), "dehaze", 4);
        const std::vector<std::string> one = {"denoise"}, ab = {"denoise", "dehaze"}, ba = {"dehaze", "denoise"};
        CHECK(bitwise_equal(sequential_restore(m, x, one), restore(reconfigure(m, TaskPrior::for_task("denoise")), x)));
        Tensor expected = restore(reconfigure(m, TaskPrior::for_task("dehaze")),
                                  restore(reconfigure(m, TaskPrior::for_task("denoise")), x));
        CHECK(bitwise_equal(sequential_restore(m, x, ab), expected));
        CHECK(max_abs_diff(sequential_restore(m, x, ab).data(), sequential_restore(m, x, ba).data()) > 0.0);
        CHECK_THROWS_AS(sequential_restore(m, x, std::vector<std::string>{}), ContractError);
    }
    TEST_CASE("evaluation reports one entry per image") {
        DRNet m = tiny(9);
        TestSet set = make_test_set("denoise", 3, 32, 1);
        MetricsReport in = evaluate_inputs(set), out = evaluate(reconfigure(m, TaskPrior::for_task("denoise")), set);
        CHECK(in.psnr.size() == 3);
        CHECK(out.ssim.size() == 3);
        CHECK(in.mean_psnr() == doctest::Approx(psnr(set.degraded[0], set.clean[0]) / 3 +
                                                psnr(set.degraded[1], set.clean[1]) / 3 +
                                                psnr(set.degraded[2], set.clean[2]) / 3));
    }
    TEST_CASE("relative error helpers") {
        Tensor a = Tensor::of({3}, {1.0f, 2.0f, 0.0f}), b = Tensor::of({3}, {1.0f, 2.5f, 0.001f});
        CHECK(max_relative_error(a, b) == doctest::Approx(0.001 / (0.001 + 1e-8)).epsilon(1e-6));
        CHECK(tensor_relative_error(a, b) == doctest::Approx(0.5 / 2.5).epsilon(1e-6));
        CHECK(tensor_relative_error(b, b) == 0.0);
    }
}

TEST_SUITE("bench") {
    TEST_CASE("fused and unfused paths agree and the report is complete") {
        DRNet m = tiny(10);
        BenchReport r = bench(m, "derain", 32, 32, 3, 5);
        CHECK(r.equal_output);
        CHECK(r.rel_error <= kEqualOutputTolerance);
        CHECK(r.reps == 3);
        CHECK(r.fused_ms > 0.0);
        CHECK(r.unfused_ms > 0.0);
        CHECK(r.fused_cost.macs < r.unfused_cost.macs);
        CHECK(r.fused_counted.macs == r.fused_cost.macs);
        CHECK(r.flop_ratio() == doctest::Approx(static_cast<double>(r.fused_cost.macs) / r.unfused_cost.macs));
        const std::string text = r.to_text();
        for (const char* key : {"task derain", "fused_ms", "unfused_ms", "fused_flops", "unfused_flops", "equal_output true"})
            CHECK(text.find(key) != std::string::npos);
    }
    TEST_CASE("single-branch banks give a ratio of one") {
        DRNetConfig c = DRNetConfig::tiny();
        c.bank1_size = c.bank2_size = 1;
        BenchReport r = bench(build(c, 1), "denoise", 32, 32, 3);
        CHECK(r.flop_ratio() == 1.0);
        CHECK(r.fused_counted.macs == r.unfused_counted.macs);
        CHECK(r.equal_output);
    }
    TEST_CASE("default configuration cost ratio at 128x128") {
        const DRNetConfig c;
        const double ratio = static_cast<double>(estimate_flops(c, 128, 128, Mode::kFused).macs) /
                             static_cast<double>(estimate_flops(c, 128, 128, Mode::kTrain).macs);
        CHECK(ratio >= 0.42);
        CHECK(ratio <= 0.55);
    }
    TEST_CASE("too few repetitions are rejected") {
        CHECK_THROWS_AS(bench(tiny(11), "denoise", 32, 32, 2), ContractError);
    }
}
