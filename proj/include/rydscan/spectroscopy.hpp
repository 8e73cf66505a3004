// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rydscan/detail/integrate.hpp"
#include "rydscan/errors.hpp"
#include "rydscan/physics.hpp"

namespace rydscan {

/// Co- and counter-propagating probe components created by retroreflection;
/// Co carries +k_p, Ctr carries -k_p.
enum class Branch { Co, Ctr };

/// Four-level ladder parameters. All frequencies are ordinary frequencies in
/// Hz; gamma_p and gamma_2g are the effective one- and two-photon HWHM used
/// by the factorized line-shape kernel. gamma_e, gamma_r, omega_p and
/// omega_c are carried for completeness (they would drive a density-matrix
/// treatment, which this synthesizer deliberately does not do).
struct LadderConfig {
    WaveGeometry geometry{};
    double delta_p0 = 80e6;       // probe detuning (set value), Hz
    double gamma_p = 5.2e6;       // one-photon linewidth HWHM, Hz
    double gamma_2g = 1.5e6;      // two-photon linewidth HWHM, Hz
    double gamma_e = 5.2e6;       // intermediate-state decay rate, Hz
    double gamma_r = 2.0e4;       // Rydberg-state decay rate, Hz
    double omega_p = 1.0e6;       // probe Rabi frequency, Hz
    double omega_c = 2.0e6;       // coupling Rabi frequency, Hz
    double omega_rf = 0.0;        // microwave Rabi frequency, Hz (= AT splitting)
    double temperature = 300.0;   // K
    double atomic_mass = 2.2069e-25; // kg (cesium)
    double weight_co = 1.0;
    double weight_ctr = 1.0;

    double sigma_v() const {
        return std::sqrt(constants::boltzmann_kb * temperature / atomic_mass);
    }

    void validate() const {
        geometry.validate();
        if (!(gamma_p > 0.0) || !(gamma_2g > 0.0) || !(gamma_e > 0.0) || !(gamma_r > 0.0))
            throw std::domain_error("LadderConfig: linewidths must be strictly positive");
        if (!(omega_p > 0.0) || !(omega_c > 0.0))
            throw std::domain_error("LadderConfig: Rabi frequencies must be strictly positive");
        if (omega_rf < 0.0)
            throw std::domain_error("LadderConfig: omega_rf must be non-negative");
        if (!(temperature > 0.0))
            throw std::domain_error("LadderConfig: temperature must be strictly positive");
        if (!(atomic_mass > 0.0))
            throw std::domain_error("LadderConfig: atomic_mass must be strictly positive");
        if (weight_co < 0.0 || weight_ctr < 0.0 || (weight_co == 0.0 && weight_ctr == 0.0))
            throw std::domain_error("LadderConfig: branch weights must be non-negative, not both zero");
    }

    static LadderConfig cesium_defaults() { return LadderConfig{}; }
};

/// 1-D EIT trace versus the scanned coupling detuning.
struct Spectrum {
    std::vector<double> delta_c0; // Hz, strictly increasing
    std::vector<double> values;   // probe absorption reduction, arb. units >= 0
    LadderConfig meta{};
};

/// Effective two-photon wavenumber K of a branch (ordinary-frequency units,
/// 1/m): k_p + k_c for Co, k_c - k_p for Ctr.
inline double two_photon_wavenumber(const WaveGeometry& g, Branch branch) {
    return branch == Branch::Co ? g.k_p() + g.k_c() : g.k_c() - g.k_p();
}

/// Doppler-shifted one-photon detunings (delta_p, delta_c) of an atom moving
/// with velocity v along the coupling beam.
inline std::pair<double, double> doppler_detunings(double v, double delta_p0,
                                                   double delta_c0,
                                                   const WaveGeometry& g,
                                                   Branch branch) {
    double delta_c = delta_c0 - g.k_c() * v;
    double delta_p = branch == Branch::Co ? delta_p0 - g.k_p() * v
                                          : delta_p0 + g.k_p() * v;
    return {delta_p, delta_c};
}

/// Two-photon detuning in the atomic frame: (delta_p0 + delta_c0) - K v.
inline double two_photon_detuning(double v, double delta_p0, double delta_c0,
                                  const WaveGeometry& g, Branch branch) {
    return (delta_p0 + delta_c0) - two_photon_wavenumber(g, branch) * v;
}

/// Velocity class where the branch's one-photon detuning vanishes:
/// +delta_p0/k_p for Co, -delta_p0/k_p for Ctr.
inline double probe_selected_velocity(double delta_p0, const WaveGeometry& g,
                                      Branch branch) {
    double v = delta_p0 / g.k_p();
    return branch == Branch::Co ? v : -v;
}

/// Positions of the two EIT branches on the scanned delta_c0 axis,
/// (+(k_c/k_p) delta_p0, -(k_c/k_p) delta_p0) for (Co, Ctr).
inline std::pair<double, double> branch_positions(double delta_p0,
                                                  const WaveGeometry& g) {
    double pos = g.k_c() / g.k_p() * delta_p0;
    return {pos, -pos};
}

/// Characteristic velocity acceptance gamma_2g/|K| of a branch.
inline double velocity_acceptance(double gamma_2g, const WaveGeometry& g,
                                  Branch branch) {
    if (!(gamma_2g > 0.0))
        throw std::domain_error("velocity_acceptance: gamma_2g must be positive");
    double k = two_photon_wavenumber(g, branch);
    if (k == 0.0)
        throw std::domain_error("velocity_acceptance: degenerate branch (K = 0)");
    return gamma_2g / std::abs(k);
}

namespace detail {

/// Peak-normalized Lorentzian with HWHM g.
inline double lorentz(double x, double g) { return g * g / (x * x + g * g); }

/// AT doublet kernel: single line at delta = 0 for omega_rf = 0, otherwise
/// two half-weight lines at +-omega_rf/2 so the scanned-doublet separation
/// equals omega_rf exactly. Area over delta is independent of omega_rf.
inline double at_doublet(double delta, double gamma, double omega_rf) {
    if (omega_rf == 0.0) return lorentz(delta, gamma);
    return 0.5 * (lorentz(delta - 0.5 * omega_rf, gamma) +
                  lorentz(delta + 0.5 * omega_rf, gamma));
}

inline double maxwell_boltzmann(double v, double sigma) {
    double u = v / sigma;
    return std::exp(-0.5 * u * u) / (sigma * std::numbers::sqrt2 * std::sqrt(std::numbers::pi));
}

} // namespace detail

/// Signal density of one velocity class: Maxwell-Boltzmann weight times the
/// one-photon Lorentzian selection factor times the AT doublet kernel on the
/// two-photon detuning.
inline double eit_signal_at(double v, double delta_c0, const LadderConfig& cfg,
                            Branch branch) {
    auto [dp, dc] = doppler_detunings(v, cfg.delta_p0, delta_c0, cfg.geometry, branch);
    (void)dc;
    double d2g = two_photon_detuning(v, cfg.delta_p0, delta_c0, cfg.geometry, branch);
    return detail::maxwell_boltzmann(v, cfg.sigma_v()) *
           detail::lorentz(dp, cfg.gamma_p) *
           detail::at_doublet(d2g, cfg.gamma_2g, cfg.omega_rf);
}

/// Doppler-averaged EIT trace over a strictly increasing delta_c0 grid.
/// Each point integrates both branches over v in [-5 sigma_v, +5 sigma_v]
/// with the resonance velocities supplied as quadrature breakpoints.
/// Deterministic for a fixed config and grid.
inline Spectrum synthesize_spectrum(const LadderConfig& cfg,
                                    std::span<const double> delta_c0_grid) {
    cfg.validate();
    if (delta_c0_grid.size() < 3)
        throw std::domain_error("synthesize_spectrum: grid needs at least 3 points");
    for (std::size_t i = 1; i < delta_c0_grid.size(); ++i)
        if (!(delta_c0_grid[i] > delta_c0_grid[i - 1]))
            throw std::domain_error("synthesize_spectrum: grid must be strictly increasing");

    const double sv = cfg.sigma_v();
    const double vmax = 5.0 * sv;
    constexpr double rel_tol = 1e-5;

    Spectrum spec;
    spec.delta_c0.assign(delta_c0_grid.begin(), delta_c0_grid.end());
    spec.values.resize(delta_c0_grid.size());
    spec.meta = cfg;

    const std::array<Branch, 2> branches{Branch::Co, Branch::Ctr};
    const std::array<double, 2> weights{cfg.weight_co, cfg.weight_ctr};

    for (std::size_t i = 0; i < delta_c0_grid.size(); ++i) {
        double dc0 = delta_c0_grid[i];
        double total = 0.0;
        bool converged = true;
        for (std::size_t b = 0; b < branches.size(); ++b) {
            if (weights[b] == 0.0) continue;
            Branch branch = branches[b];
            double k2 = two_photon_wavenumber(cfg.geometry, branch);
            double w_p = cfg.gamma_p / cfg.geometry.k_p();
            double w_2 = cfg.gamma_2g / std::abs(k2);
            std::vector<double> brk;
            auto add_feature = [&](double v0, double w) {
                for (double m : {-6.0, 0.0, 6.0}) brk.push_back(v0 + m * w);
            };
            add_feature(probe_selected_velocity(cfg.delta_p0, cfg.geometry, branch), w_p);
            if (cfg.omega_rf == 0.0) {
                add_feature((cfg.delta_p0 + dc0) / k2, w_2);
            } else {
                add_feature((cfg.delta_p0 + dc0 - 0.5 * cfg.omega_rf) / k2, w_2);
                add_feature((cfg.delta_p0 + dc0 + 0.5 * cfg.omega_rf) / k2, w_2);
            }
            auto r = detail::integrate_adaptive(
                [&](double v) { return eit_signal_at(v, dc0, cfg, branch); },
                -vmax, vmax, rel_tol, brk);
            converged = converged && r.converged;
            total += weights[b] * r.value;
        }
        if (!converged) {
            std::ostringstream msg;
            msg << "synthesize_spectrum: quadrature failed to converge at delta_c0 = "
                << dc0 << " Hz (grid index " << i << ")";
            throw NumericError(msg.str());
        }
        spec.values[i] = std::max(total, 0.0);
    }
    return spec;
}

// --- serialization -----------------------------------------------------

inline nlohmann::json ladder_to_json(const LadderConfig& cfg) {
    return nlohmann::json{
        {"schema", "rydscan-ladder-v1"},
        {"lambda_p_nm", cfg.geometry.lambda_p * 1e9},
        {"lambda_c_nm", cfg.geometry.lambda_c * 1e9},
        {"delta_p0_mhz", cfg.delta_p0 / 1e6},
        {"gamma_p_mhz", cfg.gamma_p / 1e6},
        {"gamma_2g_mhz", cfg.gamma_2g / 1e6},
        {"gamma_e_mhz", cfg.gamma_e / 1e6},
        {"gamma_r_mhz", cfg.gamma_r / 1e6},
        {"omega_p_mhz", cfg.omega_p / 1e6},
        {"omega_c_mhz", cfg.omega_c / 1e6},
        {"omega_rf_mhz", cfg.omega_rf / 1e6},
        {"temperature_k", cfg.temperature},
        {"atomic_mass_kg", cfg.atomic_mass},
        {"weight_co", cfg.weight_co},
        {"weight_ctr", cfg.weight_ctr},
    };
}

/// Parses a ladder config; absent keys keep the cesium defaults, unknown
/// keys are rejected so typos cannot silently fall back.
inline LadderConfig ladder_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("ladder config: expected a JSON object");
    if (j.contains("schema") && j.at("schema") != "rydscan-ladder-v1")
        throw ParseError("ladder config: unsupported schema '" +
                         j.at("schema").get<std::string>() + "'");
    LadderConfig cfg = LadderConfig::cesium_defaults();
    auto num = [&](const char* key, double scale, double& target) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_number())
            throw ParseError(std::string("ladder config: field '") + key + "' must be a number");
        target = j.at(key).get<double>() * scale;
    };
    num("lambda_p_nm", 1e-9, cfg.geometry.lambda_p);
    num("lambda_c_nm", 1e-9, cfg.geometry.lambda_c);
    num("delta_p0_mhz", 1e6, cfg.delta_p0);
    num("gamma_p_mhz", 1e6, cfg.gamma_p);
    num("gamma_2g_mhz", 1e6, cfg.gamma_2g);
    num("gamma_e_mhz", 1e6, cfg.gamma_e);
    num("gamma_r_mhz", 1e6, cfg.gamma_r);
    num("omega_p_mhz", 1e6, cfg.omega_p);
    num("omega_c_mhz", 1e6, cfg.omega_c);
    num("omega_rf_mhz", 1e6, cfg.omega_rf);
    num("temperature_k", 1.0, cfg.temperature);
    num("atomic_mass_kg", 1.0, cfg.atomic_mass);
    num("weight_co", 1.0, cfg.weight_co);
    num("weight_ctr", 1.0, cfg.weight_ctr);
    static const char* known[] = {
        "schema", "lambda_p_nm", "lambda_c_nm", "delta_p0_mhz", "gamma_p_mhz",
        "gamma_2g_mhz", "gamma_e_mhz", "gamma_r_mhz", "omega_p_mhz",
        "omega_c_mhz", "omega_rf_mhz", "temperature_k", "atomic_mass_kg",
        "weight_co", "weight_ctr"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ParseError("ladder config: unknown field '" + it.key() + "'");
    }
    cfg.validate();
    return cfg;
}

inline std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Writes the trace as `delta_c0_hz,value` CSV plus a JSON sidecar
/// `<path>.json` with the LadderConfig snapshot.
inline void write_spectrum(const Spectrum& spec, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw ParseError("write_spectrum: cannot open " + csv_path.string());
    out << "delta_c0_hz,value\n";
    for (std::size_t i = 0; i < spec.delta_c0.size(); ++i)
        out << format_g17(spec.delta_c0[i]) << ',' << format_g17(spec.values[i]) << '\n';
    std::ofstream side(csv_path.string() + ".json");
    side << nlohmann::json{{"schema", "rydscan-spectrum-meta-v1"},
                           {"ladder", ladder_to_json(spec.meta)}}
                .dump(2)
         << '\n';
}

inline Spectrum read_spectrum(const std::filesystem::path& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw ParseError("read_spectrum: cannot open " + csv_path.string());
    Spectrum spec;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("delta_c0_hz", 0) == 0) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("read_spectrum: line " + std::to_string(lineno) +
                             ": expected 'delta_c0_hz,value'");
        try {
            spec.delta_c0.push_back(std::stod(line.substr(0, comma)));
            spec.values.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw ParseError("read_spectrum: line " + std::to_string(lineno) +
                             ": malformed number");
        }
    }
    std::filesystem::path side = csv_path.string() + ".json";
    if (std::filesystem::exists(side)) {
        std::ifstream sj(side);
        nlohmann::json j;
        try {
            sj >> j;
        } catch (const std::exception& e) {
            throw ParseError("read_spectrum: sidecar " + side.string() + ": " + e.what());
        }
        if (j.contains("ladder")) spec.meta = ladder_from_json(j.at("ladder"));
    }
    return spec;
}

} // namespace rydscan
