// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "rydscan/errors.hpp"
#include "rydscan/spectroscopy.hpp"

namespace rydscan {

inline constexpr double fwhm_per_sigma = 2.3548200450309493; // 2 sqrt(2 ln 2)

struct DetectedPeak {
    std::size_t index;
    double position;
    double height;
};

/// Local maxima with topographic prominence >= min_prominence * max(values),
/// sorted by position. A plateau of equal maxima reports its leftmost index.
inline std::vector<DetectedPeak> find_peaks(std::span<const double> xs,
                                            std::span<const double> ys,
                                            double min_prominence) {
    if (xs.size() != ys.size())
        throw std::domain_error("find_peaks: axis/value length mismatch");
    if (ys.size() < 3)
        throw std::domain_error("find_peaks: trace too short (need >= 3 samples)");
    if (!(min_prominence > 0.0) || min_prominence > 1.0)
        throw std::domain_error("find_peaks: min_prominence must be in (0, 1]");

    const std::size_t n = ys.size();
    double global_max = *std::max_element(ys.begin(), ys.end());
    double threshold = min_prominence * global_max;

    std::vector<DetectedPeak> out;
    std::size_t i = 1;
    while (i + 1 < n) {
        if (ys[i] > ys[i - 1]) {
            // extend over a plateau of equal values
            std::size_t j = i;
            while (j + 1 < n && ys[j + 1] == ys[i]) ++j;
            if (j + 1 < n && ys[j + 1] < ys[i]) {
                // prominence: lowest point on each side before higher terrain
                double h = ys[i];
                double left_min = h, right_min = h;
                for (std::size_t k = i; k-- > 0;) {
                    if (ys[k] > h) break;
                    left_min = std::min(left_min, ys[k]);
                }
                for (std::size_t k = j + 1; k < n; ++k) {
                    if (ys[k] > h) break;
                    right_min = std::min(right_min, ys[k]);
                }
                double prominence = h - std::max(left_min, right_min);
                if (prominence >= threshold)
                    out.push_back({i, xs[i], h});
                i = j + 1;
                continue;
            }
            i = j + 1;
            continue;
        }
        ++i;
    }
    return out;
}

struct GaussianPeak {
    double center = 0.0;
    double amplitude = 0.0;
    double sigma = 0.0;

    double fwhm() const { return fwhm_per_sigma * sigma; }
    double value_at(double x) const {
        double u = (x - center) / sigma;
        return amplitude * std::exp(-0.5 * u * u);
    }
};

/// FWHM of a fitted Gaussian, 2 sqrt(2 ln 2) sigma.
inline double fwhm(const GaussianPeak& p) { return p.fwhm(); }

/// Baseline polynomial (degree <= 2, raw axis units) plus Gaussian peaks.
struct PeakFit {
    std::array<double, 3> baseline{0.0, 0.0, 0.0}; // b0 + b1 x + b2 x^2
    std::vector<GaussianPeak> peaks;               // sorted by center
    double rms_residual = 0.0;
    bool degraded_init = false;

    double baseline_at(double x) const {
        return baseline[0] + x * (baseline[1] + x * baseline[2]);
    }
    double model_at(double x) const {
        double y = baseline_at(x);
        for (const auto& p : peaks) y += p.value_at(x);
        return y;
    }
};

/// |c2 - c1| of a two-peak fit.
inline double peak_separation(const PeakFit& fit) {
    if (fit.peaks.size() != 2)
        throw std::domain_error("peak_separation: fit must have exactly 2 peaks");
    return std::abs(fit.peaks[1].center - fit.peaks[0].center);
}

namespace detail {

/// Damped least-squares state for baseline + Gaussian model in scaled
/// coordinates (x mapped to [-1, 1], y scaled by its max magnitude).
struct FitWorkspace {
    Eigen::VectorXd x;      // scaled axis
    Eigen::VectorXd y;      // scaled values
    int n_peaks;

    // params: b0, b1, b2, then (amp, center, sigma) per peak
    int n_params() const { return 3 + 3 * n_peaks; }

    double model(const Eigen::VectorXd& p, double xi) const {
        double v = p[0] + xi * (p[1] + xi * p[2]);
        for (int k = 0; k < n_peaks; ++k) {
            double a = p[3 + 3 * k], c = p[4 + 3 * k], s = p[5 + 3 * k];
            double ss = std::max(std::abs(s), 1e-12);
            double u = (xi - c) / ss;
            v += a * std::exp(-0.5 * u * u);
        }
        return v;
    }

    void residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
        for (Eigen::Index i = 0; i < x.size(); ++i) r[i] = model(p, x[i]) - y[i];
    }

    void jacobian(const Eigen::VectorXd& p, Eigen::MatrixXd& jac) const {
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            double xi = x[i];
            jac(i, 0) = 1.0;
            jac(i, 1) = xi;
            jac(i, 2) = xi * xi;
            for (int k = 0; k < n_peaks; ++k) {
                double a = p[3 + 3 * k], c = p[4 + 3 * k], s = p[5 + 3 * k];
                double ss = std::max(std::abs(s), 1e-12);
                double u = (xi - c) / ss;
                double e = std::exp(-0.5 * u * u);
                jac(i, 3 + 3 * k) = e;
                jac(i, 4 + 3 * k) = a * e * u / ss;
                jac(i, 5 + 3 * k) = a * e * u * u / ss * (s < 0 ? -1.0 : 1.0);
            }
        }
    }
};

} // namespace detail

/// Simultaneous least-squares fit of a quadratic baseline and n_peaks
/// Gaussians over the full trace. The baseline is seeded from the samples
/// outside the exclusion interval, peak centers from find_peaks inside it,
/// and the initial sigma is exclusion_width / (4 n_peaks). Iterates a damped
/// (Levenberg-Marquardt) solver until the relative cost change drops below
/// 1e-10 or 200 iterations. If fewer than n_peaks initial maxima exist the
/// centers fall back to an equal spacing and degraded_init is set.
inline PeakFit fit_baseline_and_peaks(std::span<const double> xs,
                                      std::span<const double> ys, int n_peaks,
                                      double exclusion_lo, double exclusion_hi) {
    if (n_peaks != 1 && n_peaks != 2)
        throw std::domain_error("fit_baseline_and_peaks: n_peaks must be 1 or 2");
    if (xs.size() != ys.size() || xs.size() < 5)
        throw std::domain_error("fit_baseline_and_peaks: trace too short");
    if (!(exclusion_hi > exclusion_lo))
        throw std::domain_error("fit_baseline_and_peaks: empty exclusion interval");
    if (!(xs.front() < exclusion_lo) || !(xs.back() > exclusion_hi))
        throw std::domain_error(
            "fit_baseline_and_peaks: trace must cover the exclusion interval with margin");

    const std::size_t n = xs.size();
    const double xm = 0.5 * (xs.front() + xs.back());
    const double xscale = 0.5 * (xs.back() - xs.front());
    double yscale = 0.0;
    for (double v : ys) yscale = std::max(yscale, std::abs(v));
    if (yscale == 0.0) yscale = 1.0;

    detail::FitWorkspace ws;
    ws.n_peaks = n_peaks;
    ws.x.resize(static_cast<Eigen::Index>(n));
    ws.y.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        ws.x[static_cast<Eigen::Index>(i)] = (xs[i] - xm) / xscale;
        ws.y[static_cast<Eigen::Index>(i)] = ys[i] / yscale;
    }

    // baseline seed: quadratic least squares on the outside region
    Eigen::MatrixXd bss(3, 3);
    Eigen::VectorXd bsv(3);
    bss.setZero();
    bsv.setZero();
    std::size_t n_outside = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (xs[i] >= exclusion_lo && xs[i] <= exclusion_hi) continue;
        double xi = ws.x[static_cast<Eigen::Index>(i)];
        Eigen::Vector3d phi(1.0, xi, xi * xi);
        bss += phi * phi.transpose();
        bsv += phi * ws.y[static_cast<Eigen::Index>(i)];
        ++n_outside;
    }
    Eigen::Vector3d b0 = Eigen::Vector3d::Zero();
    if (n_outside >= 3) b0 = bss.ldlt().solve(bsv);

    // peak seeds from find_peaks on the baseline-subtracted interior
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        double xi = ws.x[static_cast<Eigen::Index>(i)];
        resid[i] = ws.y[static_cast<Eigen::Index>(i)] - (b0[0] + xi * (b0[1] + xi * b0[2]));
    }
    std::vector<DetectedPeak> seeds;
    {
        auto all = find_peaks(xs, resid, 0.05);
        for (const auto& p : all)
            if (p.position >= exclusion_lo && p.position <= exclusion_hi)
                seeds.push_back(p);
        std::sort(seeds.begin(), seeds.end(),
                  [](const DetectedPeak& a, const DetectedPeak& b) { return a.height > b.height; });
        if (seeds.size() > static_cast<std::size_t>(n_peaks))
            seeds.resize(static_cast<std::size_t>(n_peaks));
        std::sort(seeds.begin(), seeds.end(),
                  [](const DetectedPeak& a, const DetectedPeak& b) { return a.position < b.position; });
    }

    PeakFit out;
    const double excl_width = exclusion_hi - exclusion_lo;
    const double sigma0 = excl_width / (4.0 * n_peaks);
    double max_resid = 1e-3;
    for (std::size_t i = 0; i < n; ++i)
        if (xs[i] >= exclusion_lo && xs[i] <= exclusion_hi)
            max_resid = std::max(max_resid, resid[i]);

    std::vector<double> centers;
    if (seeds.size() < static_cast<std::size_t>(n_peaks)) {
        out.degraded_init = true;
        for (int k = 0; k < n_peaks; ++k)
            centers.push_back(exclusion_lo + excl_width * (k + 1) / (n_peaks + 1));
    } else {
        for (const auto& s : seeds) centers.push_back(s.position);
    }

    Eigen::VectorXd p(ws.n_params());
    p[0] = b0[0];
    p[1] = b0[1];
    p[2] = b0[2];
    for (int k = 0; k < n_peaks; ++k) {
        double c = centers[static_cast<std::size_t>(k)];
        double a = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(xs[i] - c) <= sigma0) a = std::max(a, resid[i]);
        if (a <= 0.0) a = 0.5 * max_resid;
        p[3 + 3 * k] = a;
        p[4 + 3 * k] = (c - xm) / xscale;
        p[5 + 3 * k] = sigma0 / xscale;
    }

    const Eigen::Index m = static_cast<Eigen::Index>(n);
    Eigen::VectorXd r(m), r_try(m);
    Eigen::MatrixXd jac(m, ws.n_params());
    ws.residuals(p, r);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    bool converged = false;

    for (int iter = 0; iter < 200 && !converged; ++iter) {
        ws.jacobian(p, jac);
        Eigen::MatrixXd jtj = jac.transpose() * jac;
        Eigen::VectorXd jtr = jac.transpose() * r;
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd damped = jtj;
            for (int d = 0; d < ws.n_params(); ++d)
                damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
            Eigen::VectorXd step = damped.ldlt().solve(-jtr);
            Eigen::VectorXd p_try = p + step;
            ws.residuals(p_try, r_try);
            double cost_try = r_try.squaredNorm();
            if (cost_try < cost) {
                double rel_change = (cost - cost_try) / std::max(cost, 1e-300);
                p = p_try;
                r = r_try;
                cost = cost_try;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel_change < 1e-10) converged = true;
            } else {
                lambda *= 4.0;
                if (lambda > 1e14) {
                    if (cost <= 1e-20) {
                        converged = true; // already at numerical zero
                        accepted = true;
                        break;
                    }
                    std::ostringstream msg;
                    msg << "fit_baseline_and_peaks: solver stalled, rms residual "
                        << yscale * std::sqrt(cost / static_cast<double>(n));
                    throw NumericError(msg.str());
                }
            }
        }
    }

    // back-transform: scaled quadratic -> raw-axis coefficients
    double q0 = p[0] * yscale, q1 = p[1] * yscale, q2 = p[2] * yscale;
    out.baseline[2] = q2 / (xscale * xscale);
    out.baseline[1] = q1 / xscale - 2.0 * q2 * xm / (xscale * xscale);
    out.baseline[0] = q0 - q1 * xm / xscale + q2 * xm * xm / (xscale * xscale);
    for (int k = 0; k < n_peaks; ++k) {
        GaussianPeak g;
        g.amplitude = p[3 + 3 * k] * yscale;
        g.center = p[4 + 3 * k] * xscale + xm;
        g.sigma = std::abs(p[5 + 3 * k]) * xscale;
        out.peaks.push_back(g);
    }
    std::sort(out.peaks.begin(), out.peaks.end(),
              [](const GaussianPeak& a, const GaussianPeak& b) { return a.center < b.center; });
    out.rms_residual = yscale * std::sqrt(cost / static_cast<double>(n));
    return out;
}

struct AtExtraction {
    double branch_center = 0.0; // Hz
    double delta_f = 0.0;       // Hz, doublet separation
    std::array<GaussianPeak, 2> peak_pair{};
    bool unresolved = false;
    PeakFit fit;
};

/// Extracts the AT splitting of one branch: restricts the spectrum to
/// [hint - window, hint + window], fits a quadratic baseline plus two
/// Gaussians (exclusion interval = central half of the window) and returns
/// the center separation. A fitted separation below 0.8x the mean FWHM is
/// flagged unresolved.
inline AtExtraction extract_at_splitting(const Spectrum& spec, double branch_hint,
                                         double window) {
    if (!(window > 0.0))
        throw std::domain_error("extract_at_splitting: window must be positive");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < spec.delta_c0.size(); ++i) {
        double x = spec.delta_c0[i];
        if (x >= branch_hint - window && x <= branch_hint + window) {
            xs.push_back(x);
            ys.push_back(spec.values[i]);
        }
    }
    if (xs.size() < 5)
        throw std::domain_error("extract_at_splitting: window contains fewer than 5 samples");

    AtExtraction out;
    out.fit = fit_baseline_and_peaks(xs, ys, 2, branch_hint - 0.5 * window,
                                     branch_hint + 0.5 * window);
    out.peak_pair = {out.fit.peaks[0], out.fit.peaks[1]};
    out.delta_f = peak_separation(out.fit);
    out.branch_center = 0.5 * (out.fit.peaks[0].center + out.fit.peaks[1].center);
    double mean_fwhm = 0.5 * (out.fit.peaks[0].fwhm() + out.fit.peaks[1].fwhm());
    out.unresolved = out.delta_f < 0.8 * mean_fwhm;
    return out;
}

/// Trace-level FWHM of the local maximum at peak_index, via linear
/// interpolation of the half-maximum crossings.
inline double half_max_width(std::span<const double> xs, std::span<const double> ys,
                             std::size_t peak_index) {
    if (peak_index >= ys.size())
        throw std::domain_error("half_max_width: index out of range");
    double half = 0.5 * ys[peak_index];
    std::size_t i = peak_index;
    while (i > 0 && ys[i] > half) --i;
    if (ys[i] > half) throw std::domain_error("half_max_width: left crossing not covered");
    double xl = xs[i] + (half - ys[i]) * (xs[i + 1] - xs[i]) / (ys[i + 1] - ys[i]);
    std::size_t j = peak_index;
    while (j + 1 < ys.size() && ys[j] > half) ++j;
    if (ys[j] > half) throw std::domain_error("half_max_width: right crossing not covered");
    double xr = xs[j - 1] + (half - ys[j - 1]) * (xs[j] - xs[j - 1]) / (ys[j] - ys[j - 1]);
    return xr - xl;
}

inline nlohmann::json peakfit_report(const PeakFit& fit) {
    nlohmann::json peaks = nlohmann::json::array();
    for (const auto& p : fit.peaks)
        peaks.push_back({{"center", p.center},
                         {"amplitude", p.amplitude},
                         {"sigma", p.sigma},
                         {"fwhm", p.fwhm()}});
    nlohmann::json j{{"schema", "rydscan-peakfit-v1"},
                     {"baseline", {fit.baseline[0], fit.baseline[1], fit.baseline[2]}},
                     {"peaks", peaks},
                     {"rms_residual", fit.rms_residual},
                     {"degraded_init", fit.degraded_init}};
    if (fit.peaks.size() == 2) j["separation"] = peak_separation(fit);
    return j;
}

} // namespace rydscan
