// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "rydscan/errors.hpp"
#include "rydscan/grid.hpp"

namespace rydscan {

namespace detail {

/// Piecewise-linear heatmap palette (dark blue -> cyan -> yellow -> red).
inline std::array<unsigned char, 3> heat_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    struct Stop { double t; double r, g, b; };
    static constexpr Stop stops[] = {
        {0.00, 0.05, 0.03, 0.35},
        {0.25, 0.00, 0.45, 0.85},
        {0.50, 0.10, 0.80, 0.45},
        {0.75, 0.95, 0.85, 0.10},
        {1.00, 0.90, 0.10, 0.05},
    };
    for (std::size_t i = 1; i < std::size(stops); ++i) {
        if (t <= stops[i].t) {
            double u = (t - stops[i - 1].t) / (stops[i].t - stops[i - 1].t);
            auto mix = [&](double a, double b) {
                return static_cast<unsigned char>(std::lround(255.0 * (a + u * (b - a))));
            };
            return {mix(stops[i - 1].r, stops[i].r), mix(stops[i - 1].g, stops[i].g),
                    mix(stops[i - 1].b, stops[i].b)};
        }
    }
    return {230, 26, 13};
}

} // namespace detail

/// Binary PPM (P6) heatmap of a grid, one pixel per cell, row 0 at the
/// bottom. Values are normalized to the grid's own [min, max].
inline void write_heatmap_ppm(const GridData& grid, const std::filesystem::path& path) {
    if (grid.size() == 0) throw std::domain_error("write_heatmap_ppm: empty grid");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("write_heatmap_ppm: cannot open " + path.string());
    double lo = grid.v[0], hi = grid.v[0];
    for (double v : grid.v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    double span = hi > lo ? hi - lo : 1.0;
    out << "P6\n" << grid.nx << ' ' << grid.ny << "\n255\n";
    std::vector<unsigned char> row(grid.nx * 3);
    for (std::size_t iy = grid.ny; iy-- > 0;) {
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            auto rgb = detail::heat_color((grid.at(iy, ix) - lo) / span);
            row[ix * 3 + 0] = rgb[0];
            row[ix * 3 + 1] = rgb[1];
            row[ix * 3 + 2] = rgb[2];
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

/// Plain CSV emission of a grid (one row per Y index), used for per-window
/// SSIM grids and other derived rasters that carry no scan plan.
inline void write_grid_csv(const GridData& grid, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("write_grid_csv: cannot open " + path.string());
    char buf[40];
    for (std::size_t iy = 0; iy < grid.ny; ++iy) {
        for (std::size_t ix = 0; ix < grid.nx; ++ix) {
            std::snprintf(buf, sizeof buf, "%.17g", grid.at(iy, ix));
            if (ix) out << ',';
            out << buf;
        }
        out << '\n';
    }
}

/// Writes a two-column data file plus a matching gnuplot script
/// (`<base>.dat`, `<base>.gp`).
inline void write_gnuplot_pair(std::span<const double> xs, std::span<const double> ys,
                               const std::filesystem::path& base,
                               const std::string& xlabel, const std::string& ylabel,
                               const std::string& title) {
    if (xs.size() != ys.size())
        throw std::domain_error("write_gnuplot_pair: length mismatch");
    std::filesystem::path dat = base;
    dat += ".dat";
    std::filesystem::path gp = base;
    gp += ".gp";
    std::ofstream d(dat);
    if (!d) throw ParseError("write_gnuplot_pair: cannot open " + dat.string());
    char buf[80];
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", xs[i], ys[i]);
        d << buf;
    }
    std::ofstream g(gp);
    g << "set xlabel '" << xlabel << "'\n";
    g << "set ylabel '" << ylabel << "'\n";
    g << "set title '" << title << "'\n";
    g << "set grid\n";
    g << "plot '" << dat.filename().string() << "' using 1:2 with lines notitle\n";
    g << "pause -1\n";
}

} // namespace rydscan
