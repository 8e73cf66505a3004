// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rydscan/analysis.hpp"
#include "rydscan/errors.hpp"
#include "rydscan/grid.hpp"
#include "rydscan/physics.hpp"
#include "rydscan/scene.hpp"
#include "rydscan/spectroscopy.hpp"

namespace rydscan {

enum class ScanOrdering { Raster, Serpentine };
enum class ScanMode { Direct, Spectroscopic };

/// Raster plan over one XY plane. Plan geometry is kept in millimetres,
/// matching the CLI and the map file format; the engine converts to SI at
/// the field-evaluation boundary.
struct ScanPlan {
    double z_mm = 0.0;
    double x0_mm = 0.0;
    double y0_mm = 0.0;
    double lx_mm = 0.0;
    double ly_mm = 0.0;
    double dx_mm = 1.0;
    double dy_mm = 1.0;
    ScanOrdering ordering = ScanOrdering::Raster;

    std::size_t nx() const {
        return static_cast<std::size_t>(std::floor(lx_mm / dx_mm + 1e-9)) + 1;
    }
    std::size_t ny() const {
        return static_cast<std::size_t>(std::floor(ly_mm / dy_mm + 1e-9)) + 1;
    }
    std::size_t point_count() const { return nx() * ny(); }

    double x_at(std::size_t ix) const { return x0_mm + dx_mm * static_cast<double>(ix); }
    double y_at(std::size_t iy) const { return y0_mm + dy_mm * static_cast<double>(iy); }

    struct Point {
        std::size_t ix, iy;
        double x_mm, y_mm;
    };

    /// Visit order: raster repeats left-to-right, serpentine alternates the
    /// row direction. The logical grid is identical either way.
    std::vector<Point> points() const {
        std::vector<Point> out;
        out.reserve(point_count());
        for (std::size_t iy = 0; iy < ny(); ++iy) {
            bool reversed = ordering == ScanOrdering::Serpentine && (iy % 2 == 1);
            for (std::size_t c = 0; c < nx(); ++c) {
                std::size_t ix = reversed ? nx() - 1 - c : c;
                out.push_back({ix, iy, x_at(ix), y_at(iy)});
            }
        }
        return out;
    }

    bool operator==(const ScanPlan&) const = default;
};

inline ScanPlan make_plan(double z_mm, double x0_mm, double y0_mm, double lx_mm,
                          double ly_mm, double dx_mm, double dy_mm,
                          ScanOrdering ordering = ScanOrdering::Raster) {
    if (!(dx_mm > 0.0) || !(dy_mm > 0.0))
        throw std::domain_error("make_plan: step sizes must be positive");
    if (lx_mm < 0.0 || ly_mm < 0.0)
        throw std::domain_error("make_plan: extents must be non-negative");
    return ScanPlan{z_mm, x0_mm, y0_mm, lx_mm, ly_mm, dx_mm, dy_mm, ordering};
}

struct MapMeta {
    std::string scene_digest;
    std::string config_digest;
    std::string created; // optional; empty stays out of the file
    ScanMode mode = ScanMode::Direct;
    double floor_field = 0.0; // V/m, spectroscopic resolution floor
    std::vector<std::pair<std::size_t, std::size_t>> unresolved; // (iy, ix)

    bool operator==(const MapMeta&) const = default;
};

/// 2-D grid of field magnitudes (V/m) on a scan plane.
struct FieldMap {
    ScanPlan plan;
    GridData values;
    MapMeta meta;

    bool operator==(const FieldMap& o) const {
        return plan == o.plan && values.nx == o.values.nx && values.ny == o.values.ny &&
               values.v == o.values.v && meta == o.meta;
    }
};

struct Profile {
    char axis = 'x';          // varying axis
    double fixed_mm = 0.0;    // snapped fixed coordinate
    std::vector<double> coords_mm;
    std::vector<double> values;
};

/// Grid row/column through the map: axis 'x' varies X at fixed Y, axis 'y'
/// varies Y at fixed X. The coordinate snaps to the nearest grid line and
/// must lie within the plan extent.
inline Profile extract_profile(const FieldMap& map, char axis, double coordinate_mm) {
    const ScanPlan& plan = map.plan;
    Profile out;
    out.axis = axis;
    if (axis == 'x') {
        if (coordinate_mm < plan.y0_mm - 1e-9 || coordinate_mm > plan.y0_mm + plan.ly_mm + 1e-9)
            throw std::domain_error("extract_profile: Y coordinate outside plan extent");
        auto iy = static_cast<std::size_t>(std::llround((coordinate_mm - plan.y0_mm) / plan.dy_mm));
        iy = std::min(iy, plan.ny() - 1);
        out.fixed_mm = plan.y_at(iy);
        out.values = map.values.row(iy);
        for (std::size_t ix = 0; ix < plan.nx(); ++ix) out.coords_mm.push_back(plan.x_at(ix));
    } else if (axis == 'y') {
        if (coordinate_mm < plan.x0_mm - 1e-9 || coordinate_mm > plan.x0_mm + plan.lx_mm + 1e-9)
            throw std::domain_error("extract_profile: X coordinate outside plan extent");
        auto ix = static_cast<std::size_t>(std::llround((coordinate_mm - plan.x0_mm) / plan.dx_mm));
        ix = std::min(ix, plan.nx() - 1);
        out.fixed_mm = plan.x_at(ix);
        out.values = map.values.col(ix);
        for (std::size_t iy = 0; iy < plan.ny(); ++iy) out.coords_mm.push_back(plan.y_at(iy));
    } else {
        throw std::domain_error("extract_profile: axis must be 'x' or 'y'");
    }
    return out;
}

/// Per-point measurement pipeline of the spectroscopic mode: true field ->
/// omega_rf -> synthesized ctr-branch window -> doublet fit -> field. The
/// ctr line width is measured once from an omega_rf = 0 trace; splittings
/// below 0.8x that width are unresolvable and floored.
class SpectroscopicExtractor {
public:
    SpectroscopicExtractor(const LadderConfig& ladder, double dipole)
        : base_(ladder), dipole_(dipole) {
        base_.validate();
        if (!(dipole > 0.0))
            throw std::domain_error("SpectroscopicExtractor: dipole must be positive");
        if (!(base_.weight_ctr > 0.0))
            throw std::domain_error("SpectroscopicExtractor: the ctr branch must have nonzero weight");
        hint_ = branch_positions(base_.delta_p0, base_.geometry).second;
        double k_ctr = std::abs(two_photon_wavenumber(base_.geometry, Branch::Ctr));
        if (k_ctr == 0.0)
            throw std::domain_error("SpectroscopicExtractor: degenerate ctr branch");
        // analytic width estimate seeds the grid; the floor uses the
        // measured trace width
        double est = 2.0 * (base_.gamma_p * k_ctr / base_.geometry.k_p() + base_.gamma_2g);
        LadderConfig probe_cfg = base_;
        probe_cfg.omega_rf = 0.0;
        auto grid = make_grid(hint_ - 4.0 * est, hint_ + 4.0 * est, est / 16.0);
        Spectrum ref = synthesize_spectrum(probe_cfg, grid);
        auto peak = std::max_element(ref.values.begin(), ref.values.end());
        fwhm_ctr_ = half_max_width(ref.delta_c0, ref.values,
                                   static_cast<std::size_t>(peak - ref.values.begin()));
        floor_delta_f_ = 0.8 * fwhm_ctr_;
        floor_field_ = at_splitting_to_field(floor_delta_f_, dipole_);
    }

    struct Result {
        double field = 0.0;
        bool unresolved = false;
    };

    Result measure(double true_field) const {
        double delta_f = field_to_at_splitting(true_field, dipole_);
        LadderConfig cfg = base_;
        cfg.omega_rf = delta_f;
        double window = std::max(4.0 * fwhm_ctr_, delta_f + 1.6 * fwhm_ctr_);
        auto grid = make_grid(hint_ - (window + 2.0 * fwhm_ctr_),
                              hint_ + (window + 2.0 * fwhm_ctr_), fwhm_ctr_ / 8.0);
        Spectrum spec = synthesize_spectrum(cfg, grid);
        AtExtraction ext = extract_at_splitting(spec, hint_, window);
        if (ext.unresolved) return {floor_field_, true};
        return {at_splitting_to_field(ext.delta_f, dipole_), false};
    }

    double fwhm_ctr() const { return fwhm_ctr_; }
    double floor_field() const { return floor_field_; }
    double branch_hint() const { return hint_; }

private:
    static std::vector<double> make_grid(double lo, double hi, double step) {
        std::vector<double> g;
        auto n = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
        g.reserve(n);
        for (std::size_t i = 0; i < n; ++i) g.push_back(lo + step * static_cast<double>(i));
        return g;
    }

    LadderConfig base_;
    double dipole_;
    double hint_ = 0.0;
    double fwhm_ctr_ = 0.0;
    double floor_delta_f_ = 0.0;
    double floor_field_ = 0.0;
};

/// Executes a virtual scan. Direct mode records the scene magnitude (the
/// oracle path); spectroscopic mode runs the full per-point measurement
/// pipeline. Points are independent work items distributed over `jobs`
/// workers and reassembled by index, so the result is identical for any
/// worker count and either scan ordering.
inline FieldMap run_virtual_scan(const ScanPlan& plan, const Scene& scene,
                                 const LadderConfig& ladder, ScanMode mode,
                                 unsigned jobs = 1,
                                 double dipole = constants::default_rf_dipole) {
    scene.validate();
    ladder.validate();
    if (plan.point_count() == 0)
        throw std::domain_error("run_virtual_scan: empty plan");

    SceneEvaluator evaluator(scene);
    std::optional<SpectroscopicExtractor> extractor;
    if (mode == ScanMode::Spectroscopic) extractor.emplace(ladder, dipole);

    FieldMap map;
    map.plan = plan;
    map.values = GridData(plan.nx(), plan.ny());
    map.meta.mode = mode;
    map.meta.scene_digest = scene_digest(scene);
    map.meta.config_digest = ladder_digest(ladder);
    if (extractor) map.meta.floor_field = extractor->floor_field();

    const auto points = plan.points();
    std::vector<unsigned char> unresolved(points.size(), 0);
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&]() {
        for (;;) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= points.size()) return;
            if (failed.load(std::memory_order_relaxed)) return;
            const auto& pt = points[i];
            try {
                Vec3 pos{pt.x_mm * 1e-3, pt.y_mm * 1e-3, plan.z_mm * 1e-3};
                double field = evaluator.magnitude_at(pos);
                if (extractor) {
                    auto r = extractor->measure(field);
                    field = r.field;
                    unresolved[i] = r.unresolved ? 1 : 0;
                }
                map.values.at(pt.iy, pt.ix) = field;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) {
                    std::ostringstream msg;
                    msg << "scan point (iy=" << pt.iy << ", ix=" << pt.ix << "): " << e.what();
                    first_error = std::make_exception_ptr(NumericError(msg.str()));
                }
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    unsigned n_workers = std::max(1u, jobs);
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    for (std::size_t i = 0; i < points.size(); ++i)
        if (unresolved[i]) map.meta.unresolved.emplace_back(points[i].iy, points[i].ix);
    std::sort(map.meta.unresolved.begin(), map.meta.unresolved.end());
    return map;
}

// --- map persistence ----------------------------------------------------

/// Writes `# key=value` header lines followed by the CSV grid (one row per
/// Y index). The logical grid is stored raster-normalized regardless of the
/// scan ordering used to acquire it; identical inputs produce identical
/// bytes.
inline void save_map(const FieldMap& map, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("save_map: cannot open " + path.string());
    auto kv = [&](const char* key, const std::string& value) {
        out << "# " << key << '=' << value << '\n';
    };
    kv("schema", "rydscan-map-v1");
    kv("z_mm", format_g17(map.plan.z_mm));
    kv("x0_mm", format_g17(map.plan.x0_mm));
    kv("y0_mm", format_g17(map.plan.y0_mm));
    kv("lx_mm", format_g17(map.plan.lx_mm));
    kv("ly_mm", format_g17(map.plan.ly_mm));
    kv("dx_mm", format_g17(map.plan.dx_mm));
    kv("dy_mm", format_g17(map.plan.dy_mm));
    kv("nx", std::to_string(map.values.nx));
    kv("ny", std::to_string(map.values.ny));
    kv("ordering", map.plan.ordering == ScanOrdering::Serpentine ? "serpentine" : "raster");
    kv("mode", map.meta.mode == ScanMode::Spectroscopic ? "spectroscopic" : "direct");
    kv("scene_sha", map.meta.scene_digest.empty() ? "-" : map.meta.scene_digest);
    kv("config_sha", map.meta.config_digest.empty() ? "-" : map.meta.config_digest);
    if (map.meta.mode == ScanMode::Spectroscopic)
        kv("floor_v_per_m", format_g17(map.meta.floor_field));
    if (!map.meta.unresolved.empty()) {
        std::ostringstream list;
        for (std::size_t i = 0; i < map.meta.unresolved.size(); ++i) {
            if (i) list << ',';
            list << map.meta.unresolved[i].first << ':' << map.meta.unresolved[i].second;
        }
        kv("unresolved", list.str());
    }
    if (!map.meta.created.empty()) kv("created", map.meta.created);
    for (std::size_t iy = 0; iy < map.values.ny; ++iy) {
        for (std::size_t ix = 0; ix < map.values.nx; ++ix) {
            if (ix) out << ',';
            out << format_g17(map.values.at(iy, ix));
        }
        out << '\n';
    }
}

inline FieldMap load_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("load_map: cannot open " + path.string());
    FieldMap map;
    std::string line;
    std::size_t lineno = 0;
    bool schema_seen = false;
    std::size_t nx = 0, ny = 0;
    std::vector<double> cells;

    auto fail = [&](const std::string& what) {
        throw ParseError("load_map: " + path.string() + ":" + std::to_string(lineno) +
                         ": " + what);
    };

    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto eq = line.find('=');
            if (eq == std::string::npos) fail("malformed header line (expected key=value)");
            std::string key = line.substr(1, eq - 1);
            key.erase(0, key.find_first_not_of(' '));
            key.erase(key.find_last_not_of(' ') + 1);
            std::string value = line.substr(eq + 1);
            try {
                if (key == "schema") {
                    if (value != "rydscan-map-v1") fail("unsupported schema '" + value + "'");
                    schema_seen = true;
                } else if (key == "z_mm") map.plan.z_mm = std::stod(value);
                else if (key == "x0_mm") map.plan.x0_mm = std::stod(value);
                else if (key == "y0_mm") map.plan.y0_mm = std::stod(value);
                else if (key == "lx_mm") map.plan.lx_mm = std::stod(value);
                else if (key == "ly_mm") map.plan.ly_mm = std::stod(value);
                else if (key == "dx_mm") map.plan.dx_mm = std::stod(value);
                else if (key == "dy_mm") map.plan.dy_mm = std::stod(value);
                else if (key == "nx") nx = std::stoul(value);
                else if (key == "ny") ny = std::stoul(value);
                else if (key == "ordering")
                    map.plan.ordering = value == "serpentine" ? ScanOrdering::Serpentine
                                                              : ScanOrdering::Raster;
                else if (key == "mode")
                    map.meta.mode = value == "spectroscopic" ? ScanMode::Spectroscopic
                                                             : ScanMode::Direct;
                else if (key == "scene_sha") map.meta.scene_digest = value == "-" ? "" : value;
                else if (key == "config_sha") map.meta.config_digest = value == "-" ? "" : value;
                else if (key == "floor_v_per_m") map.meta.floor_field = std::stod(value);
                else if (key == "created") map.meta.created = value;
                else if (key == "unresolved") {
                    std::istringstream ss(value);
                    std::string item;
                    while (std::getline(ss, item, ',')) {
                        auto colon = item.find(':');
                        if (colon == std::string::npos) fail("malformed unresolved entry");
                        map.meta.unresolved.emplace_back(std::stoul(item.substr(0, colon)),
                                                         std::stoul(item.substr(colon + 1)));
                    }
                } else fail("unknown header key '" + key + "'");
            } catch (const ParseError&) {
                throw;
            } catch (const std::exception&) {
                fail("malformed value for header key '" + key + "'");
            }
            continue;
        }
        std::istringstream ss(line);
        std::string cell;
        std::size_t row_cells = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                cells.push_back(std::stod(cell));
            } catch (const std::exception&) {
                fail("malformed grid value '" + cell + "'");
            }
            ++row_cells;
        }
        if (nx != 0 && row_cells != nx) fail("row has " + std::to_string(row_cells) +
                                             " cells, expected nx=" + std::to_string(nx));
    }
    lineno = 0;
    if (!schema_seen) throw ParseError("load_map: " + path.string() + ": missing schema header");
    if (nx == 0 || ny == 0)
        throw ParseError("load_map: " + path.string() + ": missing nx/ny headers");
    if (cells.size() != nx * ny)
        throw ParseError("load_map: " + path.string() + ": grid has " +
                         std::to_string(cells.size()) + " cells, expected " +
                         std::to_string(nx * ny) + " (nx*ny)");
    if (map.plan.nx() != nx || map.plan.ny() != ny)
        throw ParseError("load_map: " + path.string() +
                         ": header extents disagree with nx/ny grid dimensions");
    map.values.nx = nx;
    map.values.ny = ny;
    map.values.v = std::move(cells);
    return map;
}

} // namespace rydscan
