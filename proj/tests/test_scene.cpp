// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rydscan/scene.hpp"

#include "testutil.hpp"

using namespace rydscan;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
namespace tu = testutil;

namespace {

constexpr double kFreq = 8.556e9;
const double kLambda = constants::light_speed / kFreq;

HornAperture paper_horn() {
    HornAperture horn;
    horn.center = {0.0, 0.0, 0.0};
    horn.width = 0.138;
    horn.height = 0.107;
    return horn;
}

std::vector<std::size_t> profile_lobes(const HornSampler& sampler, double z,
                                       std::vector<double>& xs_out,
                                       std::vector<double>& ys_out) {
    xs_out = tu::linspace(-0.09, 0.09, 361);
    ys_out.resize(xs_out.size());
    for (std::size_t i = 0; i < xs_out.size(); ++i)
        ys_out[i] = std::abs(sampler.field_at({xs_out[i], 0.0, z}));
    return tu::local_maxima(ys_out, 0.05);
}

} // namespace

TEST_CASE("horn_field: on-axis symmetry of the untilted horn") {
    HornSampler sampler(paper_horn(), kLambda);
    for (double d : {0.004, 0.017, 0.052}) {
        double plus = std::abs(sampler.field_at({d, 0.0, kLambda / 2}));
        double minus = std::abs(sampler.field_at({-d, 0.0, kLambda / 2}));
        CHECK_THAT(plus, WithinRel(minus, 1e-9));
        double plus_y = std::abs(sampler.field_at({0.0, d, kLambda / 2}));
        double minus_y = std::abs(sampler.field_at({0.0, -d, kLambda / 2}));
        CHECK_THAT(plus_y, WithinRel(minus_y, 1e-9));
    }
}

TEST_CASE("horn_field: main lobe plus side lobes at Z = lambda/2") {
    HornSampler sampler(paper_horn(), kLambda);
    std::vector<double> xs, ys;
    auto lobes = profile_lobes(sampler, kLambda / 2, xs, ys);
    REQUIRE(lobes.size() >= 3);
    bool central = false;
    int side = 0;
    for (auto i : lobes) {
        if (std::abs(xs[i]) < 0.002) central = true;
        else ++side;
    }
    CHECK(central);
    CHECK(side >= 2);
}

TEST_CASE("horn_field: linear in the aperture amplitude") {
    HornAperture horn = paper_horn();
    Vec3 p{0.013, -0.007, 0.02};
    Complex base = horn_field(p, horn, kLambda);
    horn.amplitude = 2.0;
    Complex doubled = horn_field(p, horn, kLambda);
    CHECK_THAT(std::abs(doubled), WithinRel(2.0 * std::abs(base), 1e-12));
}

TEST_CASE("horn_field: quadrature convergence") {
    // doubling the sample density moves |E| by < 0.5% at random points
    HornAperture coarse = paper_horn();
    HornAperture fine = paper_horn();
    fine.samples_per_wavelength = 16.0;
    HornSampler cs(coarse, kLambda), fs(fine, kLambda);
    std::mt19937_64 rng(90210);
    std::uniform_real_distribution<double> ux(-0.06, 0.06), uz(0.01, 0.12);
    for (int i = 0; i < 100; ++i) {
        Vec3 p{ux(rng), ux(rng), uz(rng)};
        double a = std::abs(cs.field_at(p));
        double b = std::abs(fs.field_at(p));
        CHECK(std::abs(a - b) <= 0.005 * std::max(a, b));
    }
}

TEST_CASE("horn_field: behind the aperture is a domain error") {
    HornSampler sampler(paper_horn(), kLambda);
    CHECK_THROWS_AS(sampler.field_at({0.0, 0.0, -0.01}), std::domain_error);
    CHECK_THROWS_AS(sampler.field_at({0.0, 0.0, 0.0}), std::domain_error);
}

TEST_CASE("horn_field: tilt breaks the Y symmetry only") {
    HornAperture tilted = paper_horn();
    tilted.tilt = 5.0 * std::numbers::pi / 180.0;
    HornSampler sampler(tilted, kLambda);
    double plus_x = std::abs(sampler.field_at({0.02, 0.0, 0.0175}));
    double minus_x = std::abs(sampler.field_at({-0.02, 0.0, 0.0175}));
    CHECK_THAT(plus_x, WithinRel(minus_x, 1e-9));
    double plus_y = std::abs(sampler.field_at({0.0, 0.02, 0.0175}));
    double minus_y = std::abs(sampler.field_at({0.0, -0.02, 0.0175}));
    CHECK(std::abs(plus_y - minus_y) > 1e-6 * std::max(plus_y, minus_y));
}

TEST_CASE("wire_pair_field: maxima track the tip separation") {
    const double h = 0.2e-3; // scan standoff
    for (double dd_mm : {1.2, 2.0, 3.0, 4.0, 5.0}) {
        double dd = dd_mm * 1e-3;
        Vec3 tip_a{-dd / 2, 0.0, 0.0}, tip_b{dd / 2, 0.0, 0.0};
        auto xs = tu::linspace(-0.5 * dd - 2e-3, 0.5 * dd + 2e-3, 1601);
        std::vector<double> ys(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i)
            ys[i] = wire_pair_field({xs[i], 0.0, h}, tip_a, tip_b, kLambda);
        std::size_t left = tu::argmax_in(xs, ys, xs.front(), 0.0);
        std::size_t right = tu::argmax_in(xs, ys, 0.0, xs.back());
        double sep = xs[right] - xs[left];
        CHECK_THAT(sep, WithinRel(dd, 0.05));
        // midpoint is a local minimum for resolved spacings
        std::size_t mid = xs.size() / 2;
        CHECK(ys[mid] < ys[left]);
        CHECK(ys[mid] < ys[right]);
    }
}

TEST_CASE("wire_pair_field: separation tracking fits the identity line") {
    // slope of extracted separation vs true spacing over 1..5 mm
    const double h = 0.2e-3;
    double sxx = 0.0, sxy = 0.0;
    for (double dd_mm : {1.0, 2.0, 3.0, 4.0, 5.0}) {
        double dd = dd_mm * 1e-3;
        Vec3 tip_a{-dd / 2, 0.0, 0.0}, tip_b{dd / 2, 0.0, 0.0};
        auto xs = tu::linspace(-0.5 * dd - 2e-3, 0.5 * dd + 2e-3, 2001);
        std::vector<double> ys(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i)
            ys[i] = wire_pair_field({xs[i], 0.0, h}, tip_a, tip_b, kLambda);
        std::size_t left = tu::argmax_in(xs, ys, xs.front(), 0.0);
        std::size_t right = tu::argmax_in(xs, ys, 0.0, xs.back());
        double sep = xs[right] - xs[left];
        sxx += dd * dd;
        sxy += dd * sep;
    }
    CHECK_THAT(sxy / sxx, WithinAbs(1.0, 0.05));
}

TEST_CASE("wire_pair_field: degenerate tips rejected") {
    Vec3 tip{0.0, 0.0, 0.0};
    CHECK_THROWS_AS(wire_pair_field({0.0, 0.0, 1e-3}, tip, tip, kLambda),
                    std::domain_error);
}

TEST_CASE("tag shadow factor") {
    OccludingTag tag;
    tag.center = {0.0, 0.0, 0.02};
    tag.width = 8e-3;
    tag.height = 8e-3;
    tag.transmission = 0.35;

    SECTION("transmission 1 is the identity") {
        OccludingTag clear = tag;
        clear.transmission = 1.0;
        for (double x : {-0.01, 0.0, 0.003, 0.02})
            CHECK(tag_shadow_factor({x, 0.0, 0.025}, clear, kLambda) == 1.0);
    }

    SECTION("full blocking zeroes the tag center") {
        OccludingTag opaque = tag;
        opaque.transmission = 0.0;
        CHECK(tag_shadow_factor({0.0, 0.0, 0.025}, opaque, kLambda) == 0.0);
        // before the tag plane nothing changes
        CHECK(tag_shadow_factor({0.0, 0.0, 0.01}, opaque, kLambda) == 1.0);
    }

    SECTION("shadow width at half depth equals the tag width") {
        // oracle: direct evaluation of the ramp on a dense grid
        auto xs = tu::linspace(-0.012, 0.012, 4801);
        std::vector<double> depth(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i)
            depth[i] = 1.0 - tag_shadow_factor({xs[i], 0.0, 0.025}, tag, kLambda);
        double half = 0.5 * (1.0 - tag.transmission);
        std::size_t lo = 0, hi = xs.size() - 1;
        while (depth[lo] < half) ++lo;
        while (depth[hi] < half) --hi;
        double width = xs[hi] - xs[lo];
        CHECK_THAT(width, WithinAbs(tag.width, kLambda / 10.0));
    }

    SECTION("apply_tag wraps a field function") {
        auto base = [](const Vec3&) { return Complex{2.0, 0.0}; };
        auto tagged = apply_tag(base, tag, kLambda);
        CHECK_THAT(std::abs(tagged({0.0, 0.0, 0.025})), WithinRel(2.0 * 0.35, 1e-12));
        CHECK_THAT(std::abs(tagged({0.03, 0.0, 0.025})), WithinRel(2.0, 1e-12));
    }
}

TEST_CASE("probe perturbation model") {
    PerturbingProbe probe;
    probe.position = {0.002, 0.001, 0.0225};
    probe.strength = 5e-4;

    auto base = [](const Vec3& p) {
        return Complex{1.0 + 10.0 * p[0], 0.5};
    };

    SECTION("s = 0 is the exact identity") {
        PerturbingProbe off = probe;
        off.strength = 0.0;
        auto wrapped = apply_probe_perturbation(base, off, kLambda);
        for (double x : {-0.01, 0.0, 0.013})
            CHECK(wrapped({x, 0.0, 0.02}) == base({x, 0.0, 0.02}));
    }

    SECTION("perturbation decays as 1/d beyond the guard") {
        auto wrapped = apply_probe_perturbation(base, probe, kLambda);
        auto delta = [&](double d) {
            Vec3 p{probe.position[0] + d, probe.position[1], probe.position[2]};
            return std::abs(wrapped(p) - base(p));
        };
        double d1 = 2.5 * kLambda / 20.0, d2 = 2.0 * d1;
        CHECK_THAT(delta(d1) / delta(d2), WithinRel(2.0, 1e-9));
    }

    SECTION("inside the guard radius the kernel saturates") {
        PerturbingProbe strong = probe;
        strong.strength = 1.0;
        auto wrapped = apply_probe_perturbation(base, strong, kLambda);
        Vec3 at_probe = probe.position;
        CHECK(std::isfinite(std::abs(wrapped(at_probe))));
        double kernel_mag = std::abs(wrapped(at_probe) - base(at_probe)) /
                            std::abs(base(probe.position));
        CHECK_THAT(kernel_mag, WithinRel(20.0 / kLambda, 1e-9));
    }

    SECTION("negative strength rejected") {
        PerturbingProbe bad = probe;
        bad.strength = -1.0;
        CHECK_THROWS_AS(bad.validate(), std::domain_error);
    }
}

TEST_CASE("scene superposition is linear") {
    Scene ab;
    ab.frequency = kFreq;
    ab.elements.emplace_back(PointRadiator{{-0.002, 0.0, 0.0}, {1.0, 0.0}});
    ab.elements.emplace_back(PointRadiator{{0.002, 0.0, 0.0}, {0.0, 1.3}});
    Scene a;
    a.frequency = kFreq;
    a.elements.emplace_back(PointRadiator{{-0.002, 0.0, 0.0}, {1.0, 0.0}});
    Scene b;
    b.frequency = kFreq;
    b.elements.emplace_back(PointRadiator{{0.002, 0.0, 0.0}, {0.0, 1.3}});

    SceneEvaluator eab(ab), ea(a), eb(b);
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    for (int i = 0; i < 32; ++i) {
        Vec3 p{u(rng), u(rng), 0.005 + std::abs(u(rng))};
        Complex sum = ea.field_at(p) + eb.field_at(p);
        CHECK_THAT(std::abs(eab.field_at(p) - sum), WithinAbs(0.0, 1e-9));
    }
}

TEST_CASE("scene validation") {
    Scene empty;
    CHECK_THROWS_AS(empty.validate(), std::domain_error);
    Scene tag_only;
    tag_only.elements.emplace_back(OccludingTag{{0, 0, 0}, 0.01, 0.01, 0.5});
    CHECK_THROWS_AS(tag_only.validate(), std::domain_error);
    Scene ok;
    ok.elements.emplace_back(PointRadiator{});
    CHECK_NOTHROW(ok.validate());
    ok.frequency = -1.0;
    CHECK_THROWS_AS(ok.validate(), std::domain_error);
}

TEST_CASE("scene JSON round trip and wire_pair sugar") {
    Scene scene;
    scene.frequency = kFreq;
    HornAperture horn = paper_horn();
    horn.tilt = 0.0872664625997164; // 5 degrees
    scene.elements.emplace_back(horn);
    scene.elements.emplace_back(OccludingTag{{0.0, 0.0, 0.02}, 8e-3, 8e-3, 0.35});
    scene.elements.emplace_back(PerturbingProbe{{0.002, 0.001, 0.0225}, 5e-4});

    auto j = scene_to_json(scene);
    auto back = scene_from_json(j);
    CHECK(scene_digest(back) == scene_digest(scene));

    SECTION("digest is sensitive to parameters") {
        Scene tweaked = scene;
        std::get<PerturbingProbe>(tweaked.elements[2]).strength = 6e-4;
        CHECK(scene_digest(tweaked) != scene_digest(scene));
    }

    SECTION("wire_pair desugars to two point radiators") {
        nlohmann::json wires = {
            {"schema", "rydscan-scene-v1"},
            {"frequency_ghz", 8.556},
            {"elements",
             {{{"type", "wire_pair"},
               {"center_mm", {0.0, 0.0, 0.0}},
               {"separation_mm", 1.2},
               {"amplitude", 2.0}}}},
        };
        auto parsed = scene_from_json(wires);
        REQUIRE(parsed.elements.size() == 2);
        auto* p0 = std::get_if<PointRadiator>(&parsed.elements[0]);
        auto* p1 = std::get_if<PointRadiator>(&parsed.elements[1]);
        REQUIRE(p0);
        REQUIRE(p1);
        CHECK_THAT(p1->position[0] - p0->position[0], WithinRel(1.2e-3, 1e-12));
    }

    SECTION("parse errors name the field") {
        nlohmann::json bad = {{"schema", "rydscan-scene-v1"}, {"elements", nlohmann::json::array()}};
        CHECK_THROWS_WITH(scene_from_json(bad),
                          Catch::Matchers::ContainsSubstring("frequency_ghz"));
        nlohmann::json bad2 = {
            {"schema", "rydscan-scene-v1"},
            {"frequency_ghz", 8.556},
            {"elements", {{{"type", "tag"}, {"center_mm", {0, 0, 0}}, {"width_mm", 8}}}},
        };
        CHECK_THROWS_AS(scene_from_json(bad2), ParseError);
    }
}
