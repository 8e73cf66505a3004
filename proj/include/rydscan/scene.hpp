// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rydscan/detail/hash.hpp"
#include "rydscan/errors.hpp"
#include "rydscan/physics.hpp"
#include "rydscan/spectroscopy.hpp"

namespace rydscan {

using Vec3 = std::array<double, 3>;
using Complex = std::complex<double>;

inline double distance(const Vec3& a, const Vec3& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                     (a[2] - b[2]) * (a[2] - b[2]));
}

/// Rectangular radiating aperture standing in for the standard-gain horn.
/// The cosine-tapered broad wall (width) lies along the scene Y axis and the
/// narrow wall (height) along X, matching the scan frame in which the
/// aperture half-dimensions coincide with the coordinate-origin offsets.
/// The narrow wall carries a cosine-on-pedestal taper; its residual edge
/// diffraction produces the main-plus-side-lobe structure of the close-in
/// field. tilt is a downward rotation about the X axis.
struct HornAperture {
    Vec3 center{0.0, 0.0, 0.0};
    double width = 0.138;   // m, tapered dimension (along Y)
    double height = 0.107;  // m, pedestal dimension (along X)
    double amplitude = 1.0; // aperture field scale, V/m
    double tilt = 0.0;      // rad
    double pedestal = 0.3;  // taper floor share on the narrow wall
    double samples_per_wavelength = 8.0;

    void validate() const {
        if (!(width > 0.0) || !(height > 0.0))
            throw std::domain_error("HornAperture: dimensions must be positive");
        if (pedestal < 0.0 || pedestal > 1.0)
            throw std::domain_error("HornAperture: pedestal must be in [0, 1]");
        if (!(samples_per_wavelength >= 2.0))
            throw std::domain_error("HornAperture: need >= 2 samples per wavelength");
    }
};

struct PointRadiator {
    Vec3 position{0.0, 0.0, 0.0};
    Complex amplitude{1.0, 0.0};
};

/// Geometric-shadow occluder between the sources and the scan plane.
struct OccludingTag {
    Vec3 center{0.0, 0.0, 0.0}; // rectangle center; outline in the XY plane
    double width = 0.0;         // m, X extent
    double height = 0.0;        // m, Y extent
    double transmission = 0.0;  // amplitude factor inside the shadow, [0, 1]

    void validate() const {
        if (!(width > 0.0) || !(height > 0.0))
            throw std::domain_error("OccludingTag: dimensions must be positive");
        if (transmission < 0.0 || transmission > 1.0)
            throw std::domain_error("OccludingTag: transmission must be in [0, 1]");
    }
};

/// Parametric stand-in for a scattering probe body: an induced point
/// re-radiator of strength s (effective scattering length, m) driven by the
/// local unperturbed field. s = 0 is the exact identity.
struct PerturbingProbe {
    Vec3 position{0.0, 0.0, 0.0};
    double strength = 0.0; // m

    void validate() const {
        if (strength < 0.0)
            throw std::domain_error("PerturbingProbe: strength must be non-negative");
    }
};

using SourceElement = std::variant<HornAperture, PointRadiator, OccludingTag, PerturbingProbe>;

/// Scalar Rayleigh-Sommerfeld evaluation of a HornAperture with the sample
/// grid precomputed; use this when evaluating many field points.
class HornSampler {
public:
    HornSampler(const HornAperture& horn, double lambda) : horn_(horn), lambda_(lambda) {
        horn.validate();
        if (!(lambda > 0.0)) throw std::domain_error("HornSampler: lambda must be positive");
        const double ct = std::cos(horn.tilt), st = std::sin(horn.tilt);
        normal_ = {0.0, -st, ct};
        int nu = std::max(4, static_cast<int>(std::ceil(horn.height / lambda *
                                                        horn.samples_per_wavelength)));
        int nv = std::max(4, static_cast<int>(std::ceil(horn.width / lambda *
                                                        horn.samples_per_wavelength)));
        double du = horn.height / nu, dv = horn.width / nv;
        points_.reserve(static_cast<std::size_t>(nu) * nv);
        weights_.reserve(points_.capacity());
        for (int iu = 0; iu < nu; ++iu) {
            double u = (iu + 0.5) * du - 0.5 * horn.height; // along X
            double taper_u = (1.0 - horn.pedestal) +
                             horn.pedestal * std::cos(std::numbers::pi * u / horn.height);
            for (int iv = 0; iv < nv; ++iv) {
                double v = (iv + 0.5) * dv - 0.5 * horn.width; // along Y, pre-tilt
                double taper_v = std::cos(std::numbers::pi * v / horn.width);
                points_.push_back({horn.center[0] + u, horn.center[1] + v * ct,
                                   horn.center[2] + v * st});
                weights_.push_back(horn.amplitude * taper_u * taper_v * du * dv);
            }
        }
    }

    /// RS-I field with the exact near-field factor (1 - 1/(ik rho)) and the
    /// obliquity cosine. Points behind or on the aperture plane are a domain
    /// error.
    Complex field_at(const Vec3& p) const {
        double axial = (p[0] - horn_.center[0]) * normal_[0] +
                       (p[1] - horn_.center[1]) * normal_[1] +
                       (p[2] - horn_.center[2]) * normal_[2];
        if (!(axial > 0.0))
            throw std::domain_error("HornSampler: field point must be in front of the aperture (Z > 0)");
        const double k = 2.0 * std::numbers::pi / lambda_;
        Complex acc{0.0, 0.0};
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const Vec3& s = points_[i];
            double dx = p[0] - s[0], dy = p[1] - s[1], dz = p[2] - s[2];
            double rho = std::sqrt(dx * dx + dy * dy + dz * dz);
            double cos_chi = (dx * normal_[0] + dy * normal_[1] + dz * normal_[2]) / rho;
            Complex near_term = 1.0 - Complex{0.0, -1.0 / (k * rho)};
            Complex phase{std::cos(k * rho), std::sin(k * rho)};
            acc += weights_[i] * cos_chi * near_term * phase / rho;
        }
        return acc / Complex{0.0, lambda_};
    }

private:
    HornAperture horn_;
    double lambda_;
    Vec3 normal_;
    std::vector<Vec3> points_;
    std::vector<double> weights_;
};

/// One-shot horn evaluation (builds the sample grid per call).
inline Complex horn_field(const Vec3& p, const HornAperture& horn, double lambda) {
    return HornSampler(horn, lambda).field_at(p);
}

/// Free-space point-source kernel exp(i k r)/r.
inline Complex point_source_field(const Vec3& p, const PointRadiator& src, double lambda) {
    double r = std::max(distance(p, src.position), 1e-12);
    double kr = 2.0 * std::numbers::pi * r / lambda;
    return src.amplitude * Complex{std::cos(kr), std::sin(kr)} / r;
}

/// Magnitude of two equal-amplitude in-phase point radiators at the wire
/// tips; on a plane at small standoff the transverse profile shows two
/// maxima whose separation tracks the tip spacing.
inline double wire_pair_field(const Vec3& p, const Vec3& tip_a, const Vec3& tip_b,
                              double lambda) {
    if (!(distance(tip_a, tip_b) > 0.0))
        throw std::domain_error("wire_pair_field: tip separation must be positive");
    PointRadiator a{tip_a, {1.0, 0.0}}, b{tip_b, {1.0, 0.0}};
    return std::abs(point_source_field(p, a, lambda) + point_source_field(p, b, lambda));
}

/// Signed distance to the tag rectangle in the XY plane (< 0 inside).
inline double tag_signed_distance(double x, double y, const OccludingTag& tag) {
    double dx = std::abs(x - tag.center[0]) - 0.5 * tag.width;
    double dy = std::abs(y - tag.center[1]) - 0.5 * tag.height;
    if (dx > 0.0 || dy > 0.0) return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
    return std::max(dx, dy);
}

/// Amplitude factor of the geometric shadow: transmission inside, 1 outside,
/// with a linear ramp of width lambda/10 centered on the outline. Applies
/// only beyond the tag plane.
inline double tag_shadow_factor(const Vec3& p, const OccludingTag& tag, double lambda) {
    if (p[2] <= tag.center[2]) return 1.0;
    double edge = lambda / 10.0;
    double d = tag_signed_distance(p[0], p[1], tag);
    double ramp = std::clamp((d + 0.5 * edge) / edge, 0.0, 1.0);
    return tag.transmission + (1.0 - tag.transmission) * ramp;
}

/// Wraps a field function with the tag's shadow factor.
template <class FieldFn>
auto apply_tag(FieldFn field, const OccludingTag& tag, double lambda) {
    tag.validate();
    return [field, tag, lambda](const Vec3& p) -> Complex {
        return field(p) * tag_shadow_factor(p, tag, lambda);
    };
}

/// Probe-scattering kernel: exp(i k d)/max(d, lambda/20). The floor keeps
/// the re-radiated term bounded when a scan point coincides with the probe.
inline Complex probe_kernel(const Vec3& p, const PerturbingProbe& probe, double lambda) {
    double d = distance(p, probe.position);
    double kd = 2.0 * std::numbers::pi * d / lambda;
    return Complex{std::cos(kd), std::sin(kd)} / std::max(d, lambda / 20.0);
}

/// Adds the probe's induced re-radiation to a field function:
/// E(r) = E0(r) + s E0(r_probe) exp(ik|r-r_probe|)/max(|r-r_probe|, lambda/20).
template <class FieldFn>
auto apply_probe_perturbation(FieldFn field, const PerturbingProbe& probe, double lambda) {
    probe.validate();
    Complex source = probe.strength * field(probe.position);
    return [field, probe, lambda, source](const Vec3& p) -> Complex {
        return field(p) + source * probe_kernel(p, probe, lambda);
    };
}

/// Composable synthetic microwave scene: radiating elements superpose as
/// complex fields; tags and probes modify the composition in element order.
struct Scene {
    double frequency = 8.556e9; // Hz
    std::vector<SourceElement> elements;

    double wavelength() const { return constants::light_speed / frequency; }

    void validate() const {
        if (!(frequency > 0.0))
            throw std::domain_error("Scene: frequency must be positive");
        bool radiating = false;
        for (const auto& e : elements) {
            std::visit([&](const auto& el) {
                using T = std::decay_t<decltype(el)>;
                if constexpr (std::is_same_v<T, HornAperture>) {
                    el.validate();
                    radiating = true;
                } else if constexpr (std::is_same_v<T, PointRadiator>) {
                    radiating = true;
                } else {
                    el.validate();
                }
            }, e);
        }
        if (!radiating)
            throw std::domain_error("Scene: needs at least one radiating element");
    }
};

/// Evaluates a scene with per-element state (horn sample grids, probe source
/// terms) precomputed once. Pure and thread-safe after construction.
class SceneEvaluator {
public:
    explicit SceneEvaluator(const Scene& scene) : scene_(scene), lambda_(scene.wavelength()) {
        scene.validate();
        for (const auto& e : scene.elements) {
            if (const auto* horn = std::get_if<HornAperture>(&e))
                horns_.emplace_back(*horn, lambda_);
        }
        // probe source terms see every element staged before them
        std::size_t stage = 0;
        for (const auto& e : scene.elements) {
            if (const auto* probe = std::get_if<PerturbingProbe>(&e)) {
                probe->validate();
                probe_sources_.push_back(probe->strength * staged_field(probe->position, stage));
            }
            ++stage;
        }
    }

    Complex field_at(const Vec3& p) const { return staged_field(p, scene_.elements.size()); }
    double magnitude_at(const Vec3& p) const { return std::abs(field_at(p)); }
    double wavelength() const { return lambda_; }

private:
    Complex staged_field(const Vec3& p, std::size_t upto) const {
        Complex field{0.0, 0.0};
        std::size_t horn_idx = 0, probe_idx = 0;
        // radiators superpose first, in element order
        for (std::size_t i = 0; i < scene_.elements.size(); ++i) {
            const auto& e = scene_.elements[i];
            if (std::holds_alternative<HornAperture>(e)) {
                if (i < upto) field += horns_[horn_idx].field_at(p);
                ++horn_idx;
            } else if (const auto* pt = std::get_if<PointRadiator>(&e)) {
                if (i < upto) field += point_source_field(p, *pt, lambda_);
            }
        }
        // then modifiers, in element order
        for (std::size_t i = 0; i < scene_.elements.size(); ++i) {
            const auto& e = scene_.elements[i];
            if (const auto* tag = std::get_if<OccludingTag>(&e)) {
                if (i < upto) field *= tag_shadow_factor(p, *tag, lambda_);
            } else if (std::holds_alternative<PerturbingProbe>(e)) {
                if (i < upto) field += probe_sources_[probe_idx] *
                                       probe_kernel(p, std::get<PerturbingProbe>(e), lambda_);
                ++probe_idx;
            }
        }
        return field;
    }

    Scene scene_;
    double lambda_;
    std::vector<HornSampler> horns_;
    std::vector<Complex> probe_sources_;
};

// --- scene JSON (lengths in mm, frequency in GHz) -----------------------

inline nlohmann::json scene_to_json(const Scene& scene) {
    nlohmann::json elements = nlohmann::json::array();
    auto mm3 = [](const Vec3& v) {
        return nlohmann::json{v[0] * 1e3, v[1] * 1e3, v[2] * 1e3};
    };
    for (const auto& e : scene.elements) {
        std::visit([&](const auto& el) {
            using T = std::decay_t<decltype(el)>;
            if constexpr (std::is_same_v<T, HornAperture>) {
                elements.push_back({{"type", "horn"},
                                    {"center_mm", mm3(el.center)},
                                    {"width_mm", el.width * 1e3},
                                    {"height_mm", el.height * 1e3},
                                    {"amplitude", el.amplitude},
                                    {"tilt_deg", el.tilt * 180.0 / std::numbers::pi},
                                    {"pedestal", el.pedestal},
                                    {"samples_per_wavelength", el.samples_per_wavelength}});
            } else if constexpr (std::is_same_v<T, PointRadiator>) {
                elements.push_back({{"type", "point"},
                                    {"position_mm", mm3(el.position)},
                                    {"amplitude_re", el.amplitude.real()},
                                    {"amplitude_im", el.amplitude.imag()}});
            } else if constexpr (std::is_same_v<T, OccludingTag>) {
                elements.push_back({{"type", "tag"},
                                    {"center_mm", mm3(el.center)},
                                    {"width_mm", el.width * 1e3},
                                    {"height_mm", el.height * 1e3},
                                    {"transmission", el.transmission}});
            } else {
                elements.push_back({{"type", "probe"},
                                    {"position_mm", mm3(el.position)},
                                    {"strength_mm", el.strength * 1e3}});
            }
        }, e);
    }
    return nlohmann::json{{"schema", "rydscan-scene-v1"},
                          {"frequency_ghz", scene.frequency / 1e9},
                          {"elements", elements}};
}

inline Scene scene_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("scene: expected a JSON object");
    if (j.contains("schema") && j.at("schema") != "rydscan-scene-v1")
        throw ParseError("scene: unsupported schema");
    Scene scene;
    if (!j.contains("frequency_ghz"))
        throw ParseError("scene: missing field 'frequency_ghz'");
    scene.frequency = j.at("frequency_ghz").get<double>() * 1e9;
    auto vec3_mm = [](const nlohmann::json& a, const std::string& field) -> Vec3 {
        if (!a.is_array() || a.size() != 3)
            throw ParseError("scene: field '" + field + "' must be [x, y, z] in mm");
        return {a[0].get<double>() * 1e-3, a[1].get<double>() * 1e-3,
                a[2].get<double>() * 1e-3};
    };
    auto require = [](const nlohmann::json& e, const char* key) -> const nlohmann::json& {
        if (!e.contains(key))
            throw ParseError(std::string("scene element: missing field '") + key + "'");
        return e.at(key);
    };
    if (!j.contains("elements") || !j.at("elements").is_array())
        throw ParseError("scene: missing field 'elements'");
    for (const auto& e : j.at("elements")) {
        std::string type = require(e, "type").get<std::string>();
        if (type == "horn") {
            HornAperture horn;
            horn.center = vec3_mm(require(e, "center_mm"), "center_mm");
            horn.width = require(e, "width_mm").get<double>() * 1e-3;
            horn.height = require(e, "height_mm").get<double>() * 1e-3;
            if (e.contains("amplitude")) horn.amplitude = e.at("amplitude").get<double>();
            if (e.contains("tilt_deg"))
                horn.tilt = e.at("tilt_deg").get<double>() * std::numbers::pi / 180.0;
            if (e.contains("pedestal")) horn.pedestal = e.at("pedestal").get<double>();
            if (e.contains("samples_per_wavelength"))
                horn.samples_per_wavelength = e.at("samples_per_wavelength").get<double>();
            scene.elements.emplace_back(horn);
        } else if (type == "point") {
            PointRadiator pt;
            pt.position = vec3_mm(require(e, "position_mm"), "position_mm");
            double re = e.contains("amplitude_re") ? e.at("amplitude_re").get<double>() : 1.0;
            double im = e.contains("amplitude_im") ? e.at("amplitude_im").get<double>() : 0.0;
            pt.amplitude = {re, im};
            scene.elements.emplace_back(pt);
        } else if (type == "wire_pair") {
            // sugar: two equal-amplitude in-phase tips split along X
            Vec3 center = vec3_mm(require(e, "center_mm"), "center_mm");
            double sep = require(e, "separation_mm").get<double>() * 1e-3;
            if (!(sep > 0.0)) throw ParseError("scene element: separation_mm must be positive");
            double amp = e.contains("amplitude") ? e.at("amplitude").get<double>() : 1.0;
            scene.elements.emplace_back(
                PointRadiator{{center[0] - 0.5 * sep, center[1], center[2]}, {amp, 0.0}});
            scene.elements.emplace_back(
                PointRadiator{{center[0] + 0.5 * sep, center[1], center[2]}, {amp, 0.0}});
        } else if (type == "tag") {
            OccludingTag tag;
            tag.center = vec3_mm(require(e, "center_mm"), "center_mm");
            tag.width = require(e, "width_mm").get<double>() * 1e-3;
            tag.height = require(e, "height_mm").get<double>() * 1e-3;
            tag.transmission = require(e, "transmission").get<double>();
            scene.elements.emplace_back(tag);
        } else if (type == "probe") {
            PerturbingProbe probe;
            probe.position = vec3_mm(require(e, "position_mm"), "position_mm");
            probe.strength = require(e, "strength_mm").get<double>() * 1e-3;
            scene.elements.emplace_back(probe);
        } else {
            throw ParseError("scene element: unknown type '" + type + "'");
        }
    }
    scene.validate();
    return scene;
}

/// Canonical digest of a scene (hash of its normalized JSON form).
inline std::string scene_digest(const Scene& scene) {
    return detail::digest_hex(scene_to_json(scene).dump());
}

inline std::string ladder_digest(const LadderConfig& cfg) {
    return detail::digest_hex(ladder_to_json(cfg).dump());
}

} // namespace rydscan
