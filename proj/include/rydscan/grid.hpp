// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace rydscan {

/// Dense row-major 2-D grid of doubles (row = Y index, col = X index).
struct GridData {
    std::size_t nx = 0;
    std::size_t ny = 0;
    std::vector<double> v;

    GridData() = default;
    GridData(std::size_t nx_, std::size_t ny_, double fill = 0.0)
        : nx(nx_), ny(ny_), v(nx_ * ny_, fill) {}

    double& at(std::size_t iy, std::size_t ix) { return v[iy * nx + ix]; }
    double at(std::size_t iy, std::size_t ix) const { return v[iy * nx + ix]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const GridData& o) const { return nx == o.nx && ny == o.ny; }

    std::vector<double> row(std::size_t iy) const {
        if (iy >= ny) throw std::domain_error("GridData::row: index out of range");
        return {v.begin() + static_cast<std::ptrdiff_t>(iy * nx),
                v.begin() + static_cast<std::ptrdiff_t>((iy + 1) * nx)};
    }
    std::vector<double> col(std::size_t ix) const {
        if (ix >= nx) throw std::domain_error("GridData::col: index out of range");
        std::vector<double> out(ny);
        for (std::size_t iy = 0; iy < ny; ++iy) out[iy] = at(iy, ix);
        return out;
    }
};

} // namespace rydscan
