// SPDX-License-Identifier: Apache-2.0

#include "drnet/wavelet.hpp"

#include "doctest.h"
#include "support.hpp"

using namespace drnet;
using namespace drnet::test;

namespace {

double energy(const Tensor& t) {
    double s = 0.0;
    for (float v : t.data()) s += static_cast<double>(v) * v;
    return s;
}

double band_energy(const SubBands& b) { return energy(b.ll) + energy(b.lh) + energy(b.hl) + energy(b.hh); }

// Random [C, H, W] with even extents up to 16 x 16 x 4.
Tensor random_image(Rng& rng, int64_t unit = 2) {
    std::uniform_int_distribution<int64_t> c(1, 4), s(1, 16 / unit);
    return random_tensor({c(rng), unit * s(rng), unit * s(rng)}, rng);
}

}  // namespace

TEST_SUITE("haar_decompose") {
    TEST_CASE("constant image is pure DC") {
        SubBands b = haar_decompose(Tensor::full({2, 4, 6}, 0.75f));
        for (float v : b.ll.data()) CHECK(v == 1.5f);
        for (const Tensor* t : {&b.lh, &b.hl, &b.hh})
            for (float v : t->data()) CHECK(v == 0.0f);
    }
    TEST_CASE("single block [[1,2],[3,4]]") {
        SubBands b = haar_decompose(Tensor::of({1, 2, 2}, {1, 2, 3, 4}));
        CHECK(b.ll.item() == 5.0f);
        CHECK(b.lh.item() == -2.0f);
        CHECK(b.hl.item() == -1.0f);
        CHECK(b.hh.item() == 0.0f);
        CHECK(band_energy(b) == doctest::Approx(30.0));
        const auto ref = oracle::haar(Tensor::of({1, 2, 2}, {1, 2, 3, 4}));
        CHECK(ref[0][0] == doctest::Approx(5.0));
        CHECK(ref[1][0] == doctest::Approx(-2.0));
        CHECK(ref[2][0] == doctest::Approx(-1.0));
        CHECK(ref[3][0] == doctest::Approx(0.0));
    }
    TEST_CASE("checkerboard lands entirely in hh") {
        Tensor x({1, 4, 4});
        for (int y = 0; y < 4; ++y)
            for (int xx = 0; xx < 4; ++xx) x.mutable_data()[static_cast<size_t>(y * 4 + xx)] = (y + xx) % 2 ? -1.0f : 1.0f;
        SubBands b = haar_decompose(x);
        for (float v : b.ll.data()) CHECK(v == 0.0f);
        for (float v : b.lh.data()) CHECK(v == 0.0f);
        for (float v : b.hl.data()) CHECK(v == 0.0f);
        for (float v : b.hh.data()) CHECK(std::abs(v) == 2.0f);
    }
    TEST_CASE("agrees with the separable 1-D composition") {
        Rng rng(12);
        for (int trial = 0; trial < 50; ++trial) {
            Tensor x = random_image(rng);
            SubBands b = haar_decompose(x);
            const auto ref = oracle::haar(x);
            CHECK(max_abs_diff(b.ll, ref[0]) < 1e-6);
            CHECK(max_abs_diff(b.lh, ref[1]) < 1e-6);
            CHECK(max_abs_diff(b.hl, ref[2]) < 1e-6);
            CHECK(max_abs_diff(b.hh, ref[3]) < 1e-6);
        }
    }
    TEST_CASE("odd extents are rejected") {
        CHECK_THROWS_AS(haar_decompose(Tensor({1, 3, 4})), DimensionError);
        CHECK_THROWS_AS(haar_decompose(Tensor({1, 4, 5})), DimensionError);
        CHECK_THROWS_AS(haar_decompose(Tensor({4, 4})), DimensionError);
    }
}

TEST_SUITE("haar_reconstruct") {
    TEST_CASE("dc band alone gives a constant image") {
        Tensor z = Tensor::zeros({1, 2, 3});
        Tensor x = haar_reconstruct({Tensor::full({1, 2, 3}, 1.2f), z, z, z});
        for (float v : x.data()) CHECK(v == doctest::Approx(0.6f));
    }
    TEST_CASE("zero bands give a zero image") {
        Tensor z = Tensor::zeros({2, 3, 3});
        Tensor x = haar_reconstruct({z, z, z, z});
        for (float v : x.data()) CHECK(v == 0.0f);
    }
    TEST_CASE("mismatched bands are rejected") {
        Tensor a = Tensor::zeros({1, 2, 2}), b = Tensor::zeros({1, 2, 3});
        CHECK_THROWS_AS(haar_reconstruct({a, a, b, a}), DimensionError);
    }
}

TEST_SUITE("wavelet properties") {
    TEST_CASE("perfect reconstruction and energy conservation over 1000 inputs") {
        Rng rng(13);
        double worst_abs = 0.0, worst_energy = 0.0;
        for (int trial = 0; trial < 1000; ++trial) {
            Tensor x = random_image(rng);
            SubBands b = haar_decompose(x);
            worst_abs = std::max(worst_abs, max_abs_diff(haar_reconstruct(b).data(), x.data()));
            const double e = energy(x);
            worst_energy = std::max(worst_energy, std::abs(band_energy(b) - e) / e);
        }
        INFO("round trip " << worst_abs << ", energy " << worst_energy);
        CHECK(worst_abs <= 1e-6);
        CHECK(worst_energy <= 1e-5);
    }
    TEST_CASE("linearity") {
        Rng rng(14);
        for (int trial = 0; trial < 100; ++trial) {
            Tensor x = random_tensor({2, 6, 8}, rng), y = random_tensor({2, 6, 8}, rng);
            const float alpha = 0.7f, beta = -1.3f;
            SubBands lhs = haar_decompose(add(scale(x, alpha), scale(y, beta)));
            SubBands bx = haar_decompose(x), by = haar_decompose(y);
            CHECK(max_abs_diff(lhs.ll.data(), add(scale(bx.ll, alpha), scale(by.ll, beta)).data()) <= 1e-5);
            CHECK(max_abs_diff(lhs.lh.data(), add(scale(bx.lh, alpha), scale(by.lh, beta)).data()) <= 1e-5);
            CHECK(max_abs_diff(lhs.hl.data(), add(scale(bx.hl, alpha), scale(by.hl, beta)).data()) <= 1e-5);
            CHECK(max_abs_diff(lhs.hh.data(), add(scale(bx.hh, alpha), scale(by.hh, beta)).data()) <= 1e-5);
        }
    }
    TEST_CASE("gradients pass central differences") {
        for (uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed);
            Tensor x = random_tensor({2, 4, 4}, rng);
            Tensor c1 = probe_coefficients(8, rng), c2 = probe_coefficients(8, rng), c3 = probe_coefficients(8, rng),
                   c4 = probe_coefficients(8, rng);
            auto f = [&](std::span<const Tensor> in) {
                SubBands b = haar_decompose(in[0]);
                return add(add(probe(b.ll, c1), probe(b.lh, c2)), add(probe(b.hl, c3), probe(b.hh, c4)));
            };
            CHECK(finite_diff_check(f, {x}) <= 1e-3);

            std::vector<Tensor> bands = {random_tensor({2, 2, 2}, rng), random_tensor({2, 2, 2}, rng),
                                         random_tensor({2, 2, 2}, rng), random_tensor({2, 2, 2}, rng)};
            Tensor c = probe_coefficients(32, rng);
            auto g = [&](std::span<const Tensor> in) { return probe(haar_reconstruct({in[0], in[1], in[2], in[3]}), c); };
            CHECK(finite_diff_check(g, bands) <= 1e-3);
        }
    }
}

TEST_SUITE("pyramid") {
    TEST_CASE("depth 0 is the identity") {
        Tensor x = Tensor::full({1, 3, 5}, 2.0f);
        WaveletPyramid p = pyramid_decompose(x, 0);
        CHECK(p.levels.empty());
        CHECK(p.base_ll.same(x));
    }
    TEST_CASE("depth 2 on 8x8 halves twice") {
        WaveletPyramid p = pyramid_decompose(Tensor::zeros({3, 8, 8}), 2);
        REQUIRE(p.levels.size() == 2);
        CHECK(p.levels[0].lh.shape() == Shape{3, 4, 4});
        CHECK(p.levels[1].hh.shape() == Shape{3, 2, 2});
        CHECK(p.base_ll.shape() == Shape{3, 2, 2});
    }
    TEST_CASE("energy is conserved across all stored bands") {
        Rng rng(15);
        for (int trial = 0; trial < 200; ++trial) {
            Tensor x = random_image(rng, 4);
            WaveletPyramid p = pyramid_decompose(x, 2);
            double e = energy(p.base_ll);
            for (const DetailBands& l : p.levels) e += energy(l.lh) + energy(l.hl) + energy(l.hh);
            CHECK(std::abs(e - energy(x)) / energy(x) <= 1e-5);
        }
    }
    TEST_CASE("round trip") {
        Rng rng(16);
        for (int trial = 0; trial < 200; ++trial) {
            Tensor x = random_image(rng, 8);
            CHECK(max_abs_diff(pyramid_reconstruct(pyramid_decompose(x, 3)).data(), x.data()) <= 1e-5);
        }
        Tensor c = Tensor::full({1, 8, 8}, 0.3f);
        CHECK(max_abs_diff(pyramid_reconstruct(pyramid_decompose(c, 3)).data(), c.data()) <= 1e-6);
        Tensor z = Tensor::zeros({1, 8, 8});
        CHECK(max_abs_diff(pyramid_reconstruct(pyramid_decompose(z, 3)).data(), z.data()) == 0.0);
    }
    TEST_CASE("divisibility is enforced") {
        CHECK_THROWS_AS(pyramid_decompose(Tensor::zeros({1, 12, 8}), 3), DimensionError);
        CHECK_THROWS_AS(pyramid_decompose(Tensor::zeros({1, 8, 8}), -1), DimensionError);
    }
}
