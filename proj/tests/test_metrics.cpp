// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rydscan/metrics.hpp"

#include "testutil.hpp"

using namespace rydscan;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GridData random_map(std::size_t nx, std::size_t ny, std::uint64_t seed) {
    GridData g(nx, ny);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : g.v) v = u(rng);
    return g;
}

} // namespace

TEST_CASE("normalize_map") {
    GridData g(2, 2);
    g.v = {1.0, 4.0, 2.0, 3.0};
    auto n = normalize_map(g);
    CHECK(n.v == std::vector<double>{0.25, 1.0, 0.5, 0.75});

    SECTION("already-normalized map is unchanged") {
        auto again = normalize_map(n);
        CHECK(again.v == n.v);
    }
    SECTION("argmax location is preserved") {
        CHECK(testutil::argmax(n.v) == testutil::argmax(g.v));
    }
    SECTION("all-zero map passes through") {
        GridData z(3, 3);
        CHECK(normalize_map(z).v == z.v);
    }
}

TEST_CASE("window_stats hand values") {
    SECTION("constant identical windows") {
        std::vector<double> w{1.0, 1.0, 1.0, 1.0};
        auto st = window_stats(w, w);
        CHECK(st.mu_i == 1.0);
        CHECK(st.mu_j == 1.0);
        CHECK(st.sigma_i == 0.0);
        CHECK(st.sigma_ij == 0.0);
    }
    SECTION("{0,2} vs {0,2}") {
        std::vector<double> w{0.0, 2.0};
        auto st = window_stats(w, w);
        CHECK(st.mu_i == 1.0);
        CHECK_THAT(st.sigma_i, WithinRel(std::sqrt(2.0), 1e-15));
        CHECK(st.sigma_ij == 2.0);
    }
    SECTION("anti-correlated windows") {
        std::vector<double> wi{0.0, 2.0}, wj{2.0, 0.0};
        auto st = window_stats(wi, wj);
        CHECK(st.sigma_ij == -2.0);
    }
    SECTION("domain errors") {
        std::vector<double> one{1.0}, two{1.0, 2.0};
        CHECK_THROWS_AS(window_stats(one, one), std::domain_error);
        CHECK_THROWS_AS(window_stats(one, two), std::domain_error);
    }
    SECTION("Cauchy-Schwarz holds on random windows") {
        std::mt19937_64 rng(31337);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> wi(64), wj(64);
            for (auto& v : wi) v = u(rng);
            for (auto& v : wj) v = u(rng);
            auto st = window_stats(wi, wj);
            CHECK(std::abs(st.sigma_ij) <= st.sigma_i * st.sigma_j + 1e-12);
        }
    }
}

TEST_CASE("ssim_components") {
    SsimParams p;
    SECTION("identical windows give (1,1,1)") {
        std::vector<double> w{0.1, 0.4, 0.9, 0.3};
        auto st = window_stats(w, w);
        auto c = ssim_components(st, p);
        CHECK(c.l == 1.0);
        CHECK(c.c == 1.0);
        CHECK(c.s == 1.0);
    }
    SECTION("constant windows 1 vs 0") {
        std::vector<double> a{1.0, 1.0, 1.0}, b{0.0, 0.0, 0.0};
        auto st = window_stats(a, b);
        auto c = ssim_components(st, p);
        CHECK_THAT(c.l, WithinRel(9.999000099990002e-05, 1e-12));
        CHECK(c.c == 1.0);
        CHECK(c.s == 1.0);
    }
    SECTION("anti-correlated equal-variance windows give s < 0") {
        std::vector<double> a{0.0, 1.0}, b{1.0, 0.0};
        auto st = window_stats(a, b);
        CHECK(ssim_components(st, p).s < 0.0);
    }
}

TEST_CASE("ssim_index properties") {
    SsimParams p;

    SECTION("self similarity is 1") {
        auto m = random_map(16, 12, 777);
        auto res = ssim_index(m, m, p);
        CHECK_THAT(res.mean, WithinAbs(1.0, 1e-12));
        for (double v : res.per_window.v) CHECK_THAT(v, WithinAbs(1.0, 1e-12));
    }

    SECTION("symmetry is exact") {
        for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u, 6u, 7u, 8u, 9u, 10u}) {
            auto a = random_map(12, 12, seed);
            auto b = random_map(12, 12, seed + 100);
            CHECK(ssim_index(a, b, p).mean == ssim_index(b, a, p).mean);
        }
    }

    SECTION("exponent form equals the compact form at every window") {
        auto a = random_map(20, 15, 991);
        auto b = random_map(20, 15, 992);
        const std::size_t w = p.window;
        std::vector<double> wi(w * w), wj(w * w);
        auto res = ssim_index(a, b, p);
        for (std::size_t oy = 0; oy + w <= a.ny; ++oy) {
            for (std::size_t ox = 0; ox + w <= a.nx; ++ox) {
                for (std::size_t r = 0; r < w; ++r)
                    for (std::size_t c = 0; c < w; ++c) {
                        wi[r * w + c] = a.at(oy + r, ox + c);
                        wj[r * w + c] = b.at(oy + r, ox + c);
                    }
                auto st = window_stats(wi, wj);
                double compact = ssim_compact(st, p);
                CHECK_THAT(res.per_window.at(oy, ox), WithinAbs(compact, 1e-12));
            }
        }
    }

    SECTION("per-window values stay in [-1, 1]") {
        for (std::uint64_t seed = 50; seed < 60; ++seed) {
            auto a = random_map(14, 14, seed);
            auto b = random_map(14, 14, seed * 31);
            auto res = ssim_index(a, b, SsimParams{});
            for (double v : res.per_window.v) {
                CHECK(v <= 1.0 + 1e-12);
                CHECK(v >= -1.0 - 1e-12);
            }
        }
    }

    SECTION("validation") {
        auto a = random_map(12, 12, 1);
        auto b = random_map(13, 12, 1);
        CHECK_THROWS_AS(ssim_index(a, b, p), std::domain_error);
        auto tiny = random_map(4, 4, 1);
        CHECK_THROWS_AS(ssim_index(tiny, tiny, p), std::domain_error);
        GridData not_norm(12, 12, 2.0);
        CHECK_THROWS_AS(ssim_index(not_norm, not_norm, p), std::domain_error);
    }
}

TEST_CASE("difference and background subtraction") {
    auto a = random_map(9, 9, 4001);
    auto b = random_map(9, 9, 4002);

    SECTION("m - m vanishes") {
        auto d = difference_map(a, a);
        for (double v : d.v) CHECK(v == 0.0);
    }
    SECTION("antisymmetry") {
        auto ab = difference_map(a, b);
        auto ba = difference_map(b, a);
        for (std::size_t i = 0; i < ab.v.size(); ++i) CHECK(ab.v[i] == -ba.v[i]);
    }
    SECTION("background_subtract matches difference_map") {
        CHECK(background_subtract(a, b).v == difference_map(a, b).v);
    }
    SECTION("shape mismatch") {
        auto c = random_map(8, 9, 1);
        CHECK_THROWS_AS(difference_map(a, c), std::domain_error);
    }
}

TEST_CASE("sbr") {
    std::vector<double> sig{0.0, 3.2, 1.0}, bg{0.5, 1.5, 1.0};
    CHECK_THAT(sbr(sig, bg), WithinRel(3.2, 1e-12));
    CHECK_THAT(sbr(bg, bg), WithinRel(1.0, 1e-12));

    SECTION("scaling both inputs leaves sbr unchanged") {
        std::vector<double> sig2 = sig, bg2 = bg;
        for (double& v : sig2) v *= 7.5;
        for (double& v : bg2) v *= 7.5;
        CHECK_THAT(sbr(sig2, bg2), WithinRel(sbr(sig, bg), 1e-12));
    }
    SECTION("flat background is a domain error") {
        std::vector<double> flat{1.0, 1.0, 1.0};
        CHECK_THROWS_AS(sbr(sig, flat), std::domain_error);
        CHECK_THROWS_AS(sbr(std::vector<double>{}, bg), std::domain_error);
    }
}

TEST_CASE("snr_box") {
    SECTION("uniform map with a quarter-area box gives 1/3") {
        GridData g(10, 10, 1.0);
        PixelBox box{0, 0, 4, 4}; // 25 of 100 pixels
        CHECK_THAT(snr_box(g, box), WithinRel(1.0 / 3.0, 1e-12));
    }
    SECTION("invariant under global scaling") {
        auto g = random_map(12, 10, 8080);
        PixelBox box{2, 2, 6, 5};
        double base = snr_box(g, box);
        for (double& v : g.v) v *= 3.7;
        CHECK_THAT(snr_box(g, box), WithinRel(base, 1e-12));
    }
    SECTION("zero outside energy is a domain error") {
        GridData g(6, 6);
        g.at(2, 2) = 1.0;
        PixelBox box{1, 1, 3, 3};
        CHECK_THROWS_AS(snr_box(g, box), std::domain_error);
    }
    SECTION("box bounds validated") {
        GridData g(6, 6, 1.0);
        CHECK_THROWS_AS(snr_box(g, (PixelBox{0, 0, 6, 3})), std::domain_error);
        CHECK_THROWS_AS(snr_box(g, (PixelBox{0, 0, 5, 5})), std::domain_error);
        CHECK_THROWS_AS(snr_box(g, (PixelBox{3, 0, 2, 3})), std::domain_error);
    }
}

TEST_CASE("metric report JSON") {
    auto a = random_map(12, 12, 31);
    auto res = ssim_index(a, a, SsimParams{});
    auto j = metric_report(res, SsimParams{});
    CHECK(j.at("schema") == "rydscan-metrics-v1");
    CHECK_THAT(j.at("ssim").get<double>(), WithinAbs(1.0, 1e-12));
    CHECK(j.at("params").at("window") == 8);
}
