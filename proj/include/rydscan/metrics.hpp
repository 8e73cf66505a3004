// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "rydscan/grid.hpp"

namespace rydscan {

/// SSIM parameters. With the defaults the exponent form l^a c^b s^g reduces
/// algebraically to the single-fraction compact form (requires C3 = C2/2).
struct SsimParams {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0; // L, for maps normalized to [0, 1]
    std::size_t window = 8;     // side length, pixels
    std::size_t stride = 1;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
    double c3() const { return 0.5 * c2(); }

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0))
            throw std::domain_error("SsimParams: exponents must be positive");
        if (window < 2 || stride < 1)
            throw std::domain_error("SsimParams: window must be >= 2, stride >= 1");
    }
};

struct WindowStats {
    double mu_i = 0.0;
    double mu_j = 0.0;
    double sigma_i = 0.0;  // N-1 normalization
    double sigma_j = 0.0;
    double sigma_ij = 0.0; // N-1 normalization
    std::size_t n = 0;
};

struct SsimComponents {
    double l = 0.0;
    double c = 0.0;
    double s = 0.0;
};

/// Divides by the global maximum; an all-zero map passes through unchanged.
inline GridData normalize_map(const GridData& map) {
    double mx = 0.0;
    for (double v : map.v) mx = std::max(mx, v);
    if (mx <= 0.0) return map;
    GridData out = map;
    for (double& v : out.v) v /= mx;
    return out;
}

/// Mean, N-1 standard deviation and N-1 covariance of two equal-shape
/// windows.
inline WindowStats window_stats(std::span<const double> win_i,
                                std::span<const double> win_j) {
    if (win_i.size() != win_j.size())
        throw std::domain_error("window_stats: windows must have equal shape");
    if (win_i.size() < 2)
        throw std::domain_error("window_stats: need at least 2 pixels");
    WindowStats st;
    st.n = win_i.size();
    for (std::size_t k = 0; k < st.n; ++k) {
        st.mu_i += win_i[k];
        st.mu_j += win_j[k];
    }
    st.mu_i /= static_cast<double>(st.n);
    st.mu_j /= static_cast<double>(st.n);
    double var_i = 0.0, var_j = 0.0, cov = 0.0;
    for (std::size_t k = 0; k < st.n; ++k) {
        double di = win_i[k] - st.mu_i;
        double dj = win_j[k] - st.mu_j;
        var_i += di * di;
        var_j += dj * dj;
        cov += di * dj;
    }
    double denom = static_cast<double>(st.n - 1);
    st.sigma_i = std::sqrt(var_i / denom);
    st.sigma_j = std::sqrt(var_j / denom);
    st.sigma_ij = cov / denom;
    return st;
}

/// Luminance, contrast and structure comparison functions.
inline SsimComponents ssim_components(const WindowStats& st, const SsimParams& p) {
    SsimComponents out;
    out.l = (2.0 * st.mu_i * st.mu_j + p.c1()) /
            (st.mu_i * st.mu_i + st.mu_j * st.mu_j + p.c1());
    out.c = (2.0 * st.sigma_i * st.sigma_j + p.c2()) /
            (st.sigma_i * st.sigma_i + st.sigma_j * st.sigma_j + p.c2());
    out.s = (st.sigma_ij + p.c3()) / (st.sigma_i * st.sigma_j + p.c3());
    return out;
}

struct SsimResult {
    double mean = 0.0;   // scalar index: mean over all windows
    double mean_l = 0.0;
    double mean_c = 0.0;
    double mean_s = 0.0;
    GridData per_window; // window SSIM grid (top-left anchored)
};

/// Windowed SSIM between two normalized maps: per window l^a c^b s^g, with
/// borders truncated (only fully interior windows count) and the scalar
/// index the mean over windows.
inline SsimResult ssim_index(const GridData& map_i, const GridData& map_j,
                             const SsimParams& params = {}) {
    params.validate();
    if (!map_i.same_shape(map_j))
        throw std::domain_error("ssim_index: map shapes differ");
    if (map_i.nx < params.window || map_i.ny < params.window)
        throw std::domain_error("ssim_index: maps smaller than the SSIM window");
    for (const GridData* m : {&map_i, &map_j})
        for (double v : m->v)
            if (v < -1e-9 || v > 1.0 + 1e-9)
                throw std::domain_error("ssim_index: maps must be normalized to [0, 1]");

    const std::size_t w = params.window;
    const std::size_t out_nx = (map_i.nx - w) / params.stride + 1;
    const std::size_t out_ny = (map_i.ny - w) / params.stride + 1;
    SsimResult res;
    res.per_window = GridData(out_nx, out_ny);

    std::vector<double> wi(w * w), wj(w * w);
    double acc = 0.0, acc_l = 0.0, acc_c = 0.0, acc_s = 0.0;
    for (std::size_t oy = 0; oy < out_ny; ++oy) {
        for (std::size_t ox = 0; ox < out_nx; ++ox) {
            std::size_t y0 = oy * params.stride, x0 = ox * params.stride;
            for (std::size_t r = 0; r < w; ++r)
                for (std::size_t c = 0; c < w; ++c) {
                    wi[r * w + c] = map_i.at(y0 + r, x0 + c);
                    wj[r * w + c] = map_j.at(y0 + r, x0 + c);
                }
            auto st = window_stats(wi, wj);
            auto comp = ssim_components(st, params);
            double ssim;
            if (params.alpha == 1.0 && params.beta == 1.0 && params.gamma == 1.0) {
                ssim = comp.l * comp.c * comp.s;
            } else {
                ssim = std::pow(comp.l, params.alpha) * std::pow(comp.c, params.beta) *
                       std::pow(std::abs(comp.s), params.gamma) * (comp.s < 0 ? -1.0 : 1.0);
            }
            res.per_window.at(oy, ox) = ssim;
            acc += ssim;
            acc_l += comp.l;
            acc_c += comp.c;
            acc_s += comp.s;
        }
    }
    double n = static_cast<double>(out_nx * out_ny);
    res.mean = acc / n;
    res.mean_l = acc_l / n;
    res.mean_c = acc_c / n;
    res.mean_s = acc_s / n;
    return res;
}

/// Compact single-fraction SSIM of one window (main-text form); equals the
/// exponent form when the default parameters are active.
inline double ssim_compact(const WindowStats& st, const SsimParams& p) {
    return (2.0 * st.mu_i * st.mu_j + p.c1()) * (2.0 * st.sigma_ij + p.c2()) /
           ((st.mu_i * st.mu_i + st.mu_j * st.mu_j + p.c1()) *
            (st.sigma_i * st.sigma_i + st.sigma_j * st.sigma_j + p.c2()));
}

/// Elementwise map_i - map_j (signed).
inline GridData difference_map(const GridData& map_i, const GridData& map_j) {
    if (!map_i.same_shape(map_j))
        throw std::domain_error("difference_map: map shapes differ");
    GridData out = map_i;
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] -= map_j.v[k];
    return out;
}

/// Background-subtracted image: with_target - background, sign retained.
inline GridData background_subtract(const GridData& with_target,
                                    const GridData& background) {
    return difference_map(with_target, background);
}

/// Signal-to-background ratio (I_Smax - I_Smin)/(I_Bmax - I_Bmin).
inline double sbr(std::span<const double> signal_trace,
                  std::span<const double> background_trace) {
    if (signal_trace.empty() || background_trace.empty())
        throw std::domain_error("sbr: traces must be non-empty");
    auto [smin, smax] = std::minmax_element(signal_trace.begin(), signal_trace.end());
    auto [bmin, bmax] = std::minmax_element(background_trace.begin(), background_trace.end());
    double denom = *bmax - *bmin;
    if (!(denom > 0.0)) throw std::domain_error("sbr: flat background (zero range)");
    return (*smax - *smin) / denom;
}

/// Pixel rectangle, inclusive bounds.
struct PixelBox {
    std::size_t ix0 = 0, iy0 = 0, ix1 = 0, iy1 = 0;
};

/// Box S/N: integrated squared field inside the box over that outside.
inline double snr_box(const GridData& map, const PixelBox& box) {
    if (box.ix1 < box.ix0 || box.iy1 < box.iy0 || box.ix1 >= map.nx || box.iy1 >= map.ny)
        throw std::domain_error("snr_box: box must lie inside the map");
    if ((box.ix1 - box.ix0 + 1) * (box.iy1 - box.iy0 + 1) >= map.size())
        throw std::domain_error("snr_box: outside region is empty");
    double inside = 0.0, outside = 0.0;
    for (std::size_t iy = 0; iy < map.ny; ++iy)
        for (std::size_t ix = 0; ix < map.nx; ++ix) {
            double v = map.at(iy, ix);
            bool in = ix >= box.ix0 && ix <= box.ix1 && iy >= box.iy0 && iy <= box.iy1;
            (in ? inside : outside) += v * v;
        }
    if (!(outside > 0.0)) throw std::domain_error("snr_box: zero energy outside the box");
    return inside / outside;
}

inline nlohmann::json metric_report(const SsimResult& ssim, const SsimParams& params) {
    return nlohmann::json{
        {"schema", "rydscan-metrics-v1"},
        {"ssim", ssim.mean},
        {"mean_l", ssim.mean_l},
        {"mean_c", ssim.mean_c},
        {"mean_s", ssim.mean_s},
        {"params",
         {{"alpha", params.alpha},
          {"beta", params.beta},
          {"gamma", params.gamma},
          {"k1", params.k1},
          {"k2", params.k2},
          {"dynamic_range", params.dynamic_range},
          {"window", params.window},
          {"stride", params.stride}}},
    };
}

} // namespace rydscan
