// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace rydscan::detail {

struct QuadratureResult {
    double value = 0.0;
    bool converged = true;
};

/// Adaptive Simpson quadrature over [a, b] with user-supplied interior
/// breakpoints. Breakpoints should mark narrow features (resonance
/// velocities); each sub-interval is refined independently so peaks pinned
/// at interval ends are never stepped over. Deterministic for a given
/// integrand and argument list.
template <class F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double rel_tol,
                                    std::span<const double> breakpoints = {}) {
    QuadratureResult result;
    if (!(b > a)) return result;

    std::vector<double> nodes;
    nodes.push_back(a);
    for (double x : breakpoints)
        if (x > a && x < b) nodes.push_back(x);
    nodes.push_back(b);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end(),
                            [&](double u, double v) { return v - u < 1e-12 * (b - a); }),
                nodes.end());
    if (nodes.back() < b) nodes.push_back(b);

    auto simpson = [](double fa, double fm, double fb, double h) {
        return h / 6.0 * (fa + 4.0 * fm + fb);
    };

    // coarse scale estimate; an underestimate only costs extra refinement
    double scale = 0.0;
    const int pre = 16;
    std::vector<double> piece_estimate(nodes.size() - 1, 0.0);
    for (std::size_t p = 0; p + 1 < nodes.size(); ++p) {
        double lo = nodes[p], hi = nodes[p + 1], acc = 0.0;
        double h = (hi - lo) / pre;
        double fprev = f(lo);
        for (int i = 1; i <= pre; ++i) {
            double x = lo + h * i;
            double fx = f(x);
            acc += 0.5 * h * (fprev + fx);
            fprev = fx;
        }
        piece_estimate[p] = acc;
        scale += std::abs(acc);
    }
    if (scale <= 0.0) scale = 1e-300;
    const double eps_total = rel_tol * scale;
    const double eps_piece = eps_total / static_cast<double>(nodes.size() - 1);

    struct Frame {
        double a, b, fa, fm, fb, s, eps;
        int depth;
    };

    constexpr int max_depth = 48;
    for (std::size_t p = 0; p + 1 < nodes.size(); ++p) {
        double lo = nodes[p], hi = nodes[p + 1];
        double flo = f(lo), fmid = f(0.5 * (lo + hi)), fhi = f(hi);
        std::vector<Frame> stack;
        stack.push_back({lo, hi, flo, fmid, fhi,
                         simpson(flo, fmid, fhi, hi - lo), eps_piece, 0});
        while (!stack.empty()) {
            Frame fr = stack.back();
            stack.pop_back();
            double m = 0.5 * (fr.a + fr.b);
            double lm = 0.5 * (fr.a + m), rm = 0.5 * (m + fr.b);
            double flm = f(lm), frm = f(rm);
            double sl = simpson(fr.fa, flm, fr.fm, m - fr.a);
            double sr = simpson(fr.fm, frm, fr.fb, fr.b - m);
            double s2 = sl + sr;
            // force a few splits so deceptively smooth coarse samples
            // cannot hide a narrow line
            if (fr.depth >= 4 && std::abs(s2 - fr.s) <= 15.0 * fr.eps) {
                result.value += s2 + (s2 - fr.s) / 15.0;
            } else if (fr.depth >= max_depth) {
                result.value += s2;
                result.converged = false;
            } else {
                stack.push_back({fr.a, m, fr.fa, flm, fr.fm, sl, fr.eps / 2.0, fr.depth + 1});
                stack.push_back({m, fr.b, fr.fm, frm, fr.fb, sr, fr.eps / 2.0, fr.depth + 1});
            }
        }
    }
    return result;
}

} // namespace rydscan::detail
