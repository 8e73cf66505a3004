// SPDX-License-Identifier: Apache-2.0
//
// rydscan: synthesize EIT-AT spectra, run virtual near-field scans over
// synthetic microwave scenes, and evaluate the resulting field maps.
// Lengths on the command line are millimetres, frequencies MHz/GHz; exit
// codes: 0 success, 2 usage or input validation, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rydscan/rydscan.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_usage = 2;
constexpr int exit_numeric = 3;

json load_json_file(const fs::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw rydscan::ParseError(std::string(what) + ": cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw rydscan::ParseError(std::string(what) + ": " + path.string() + ": " + e.what());
    }
    return j;
}

rydscan::LadderConfig load_ladder(const std::string& path) {
    if (path.empty()) return rydscan::LadderConfig::cesium_defaults();
    return rydscan::ladder_from_json(load_json_file(path, "ladder config"));
}

void write_text(const fs::path& path, const std::string& text, const char* what) {
    std::ofstream out(path);
    if (!out) throw rydscan::ParseError(std::string(what) + ": cannot open " + path.string());
    out << text;
}

std::vector<double> parse_grid_mhz(const std::string& spec) {
    // lo:step:hi in MHz
    auto c1 = spec.find(':');
    auto c2 = spec.rfind(':');
    if (c1 == std::string::npos || c2 == c1)
        throw rydscan::ParseError("grid: expected lo:step:hi (MHz), got '" + spec + "'");
    double lo, step, hi;
    try {
        lo = std::stod(spec.substr(0, c1));
        step = std::stod(spec.substr(c1 + 1, c2 - c1 - 1));
        hi = std::stod(spec.substr(c2 + 1));
    } catch (const std::exception&) {
        throw rydscan::ParseError("grid: malformed number in '" + spec + "'");
    }
    if (!(step > 0.0) || !(hi > lo))
        throw rydscan::ParseError("grid: need step > 0 and hi > lo");
    std::vector<double> grid;
    for (double x = lo; x <= hi + 0.5 * step; x += step) grid.push_back(x * 1e6);
    if (grid.size() < 3) throw rydscan::ParseError("grid: needs at least 3 points");
    return grid;
}

rydscan::GridData normalized(const rydscan::FieldMap& map) {
    return rydscan::normalize_map(map.values);
}

struct CliError {
    int code;
    std::string message;
};

int run_spectrum(const std::string& config_path, std::optional<double> delta_p0_mhz,
                 std::optional<double> omega_rf_mhz, const std::string& grid_spec,
                 const std::string& out_path, const std::string& gnuplot_base) {
    rydscan::LadderConfig cfg;
    std::vector<double> grid;
    try {
        cfg = load_ladder(config_path);
        if (delta_p0_mhz) cfg.delta_p0 = *delta_p0_mhz * 1e6;
        if (omega_rf_mhz) cfg.omega_rf = *omega_rf_mhz * 1e6;
        cfg.validate();
        grid = parse_grid_mhz(grid_spec);
    } catch (const std::exception& e) {
        std::cerr << "rydscan spectrum: " << e.what() << '\n';
        return exit_usage;
    }
    try {
        auto spec = rydscan::synthesize_spectrum(cfg, grid);
        rydscan::write_spectrum(spec, out_path);
        if (!gnuplot_base.empty())
            rydscan::write_gnuplot_pair(spec.delta_c0, spec.values, gnuplot_base,
                                        "coupling detuning (Hz)", "EIT signal (arb.)",
                                        "EIT spectrum");
        std::cout << "wrote " << out_path << " (" << grid.size() << " points)\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "rydscan spectrum: " << e.what() << '\n';
        return exit_numeric;
    }
}

int run_scan(const std::string& scene_path, const std::string& config_path,
             const std::string& mode_name, double z_mm, double x0_mm, double y0_mm,
             double lx_mm, double ly_mm, double dx_mm, double dy_mm,
             const std::string& ordering_name, unsigned jobs, double dipole_ea0,
             const std::string& out_path, const std::string& ppm_path) {
    rydscan::Scene scene;
    rydscan::LadderConfig ladder;
    rydscan::ScanPlan plan;
    rydscan::ScanMode mode;
    try {
        scene = rydscan::scene_from_json(load_json_file(scene_path, "scene"));
        ladder = load_ladder(config_path);
        if (mode_name == "direct") mode = rydscan::ScanMode::Direct;
        else if (mode_name == "spectroscopic") mode = rydscan::ScanMode::Spectroscopic;
        else throw rydscan::ParseError("mode: must be 'direct' or 'spectroscopic'");
        auto ordering = ordering_name == "serpentine" ? rydscan::ScanOrdering::Serpentine
                                                      : rydscan::ScanOrdering::Raster;
        if (ordering_name != "raster" && ordering_name != "serpentine")
            throw rydscan::ParseError("ordering: must be 'raster' or 'serpentine'");
        plan = rydscan::make_plan(z_mm, x0_mm, y0_mm, lx_mm, ly_mm, dx_mm, dy_mm, ordering);
        if (!(dipole_ea0 > 0.0))
            throw rydscan::ParseError("dipole-ea0: must be positive");
    } catch (const std::exception& e) {
        std::cerr << "rydscan scan: " << e.what() << '\n';
        return exit_usage;
    }
    try {
        auto map = rydscan::run_virtual_scan(plan, scene, ladder, mode, jobs,
                                             dipole_ea0 * rydscan::constants::atomic_dipole);
        rydscan::save_map(map, out_path);
        if (!ppm_path.empty()) rydscan::write_heatmap_ppm(map.values, ppm_path);
        std::cout << "wrote " << out_path << " (" << map.values.nx << "x" << map.values.ny
                  << " points, " << map.meta.unresolved.size() << " unresolved)\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "rydscan scan: " << e.what() << '\n';
        return exit_numeric;
    }
}

int run_compare(const std::string& map_a_path, const std::string& map_b_path,
                std::size_t window, std::size_t stride, const std::string& out_path,
                const std::string& ssim_map_path, const std::string& ssim_ppm_path) {
    rydscan::FieldMap a, b;
    rydscan::SsimParams params;
    try {
        a = rydscan::load_map(map_a_path);
        b = rydscan::load_map(map_b_path);
        params.window = window;
        params.stride = stride;
        params.validate();
    } catch (const std::exception& e) {
        std::cerr << "rydscan compare: " << e.what() << '\n';
        return exit_usage;
    }
    try {
        auto res = rydscan::ssim_index(normalized(a), normalized(b), params);
        json report = rydscan::metric_report(res, params);
        report["map_a"] = map_a_path;
        report["map_b"] = map_b_path;
        if (!ssim_map_path.empty()) {
            rydscan::write_grid_csv(res.per_window, ssim_map_path);
            report["ssim_map"] = ssim_map_path;
        }
        write_text(out_path, report.dump(2) + "\n", "compare report");
        if (!ssim_ppm_path.empty()) rydscan::write_heatmap_ppm(res.per_window, ssim_ppm_path);
        std::cout << "SSIM = " << res.mean << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "rydscan compare: " << e.what() << '\n';
        return exit_numeric;
    }
}

int run_resolve(const std::string& map_path, const std::string& axis, double coord_mm,
                int n_peaks, double exclude_lo_mm, double exclude_hi_mm,
                const std::string& out_path, const std::string& gnuplot_base) {
    rydscan::FieldMap map;
    try {
        map = rydscan::load_map(map_path);
        if (axis != "x" && axis != "y")
            throw rydscan::ParseError("axis: must be 'x' or 'y'");
        if (n_peaks != 1 && n_peaks != 2)
            throw rydscan::ParseError("n-peaks: must be 1 or 2");
        if (!(exclude_hi_mm > exclude_lo_mm))
            throw rydscan::ParseError("exclusion interval: need hi > lo");
    } catch (const std::exception& e) {
        std::cerr << "rydscan resolve: " << e.what() << '\n';
        return exit_usage;
    }
    try {
        auto profile = rydscan::extract_profile(map, axis[0], coord_mm);
        auto fit = rydscan::fit_baseline_and_peaks(profile.coords_mm, profile.values,
                                                   n_peaks, exclude_lo_mm, exclude_hi_mm);
        json report = rydscan::peakfit_report(fit);
        report["axis"] = axis;
        report["coordinate_mm"] = profile.fixed_mm;
        write_text(out_path, report.dump(2) + "\n", "resolve report");
        if (!gnuplot_base.empty())
            rydscan::write_gnuplot_pair(profile.coords_mm, profile.values, gnuplot_base,
                                        "position (mm)", "|E| (V/m)", "scan profile");
        if (n_peaks == 2)
            std::cout << "separation = " << rydscan::peak_separation(fit) << " mm\n";
        else
            std::cout << "fwhm = " << fit.peaks[0].fwhm() << " mm\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "rydscan resolve: " << e.what() << '\n';
        return exit_numeric;
    }
}

int run_diff(const std::string& with_path, const std::string& without_path,
             const std::string& box_spec, const std::string& axis, double signal_mm,
             double background_mm, const std::string& out_map_path,
             const std::string& out_report_path, const std::string& ppm_path) {
    rydscan::FieldMap with_map, without_map;
    std::optional<rydscan::PixelBox> box;
    try {
        with_map = rydscan::load_map(with_path);
        without_map = rydscan::load_map(without_path);
        if (axis != "x" && axis != "y")
            throw rydscan::ParseError("axis: must be 'x' or 'y'");
        if (!box_spec.empty()) {
            rydscan::PixelBox b;
            if (std::sscanf(box_spec.c_str(), "%zu,%zu,%zu,%zu", &b.ix0, &b.iy0, &b.ix1,
                            &b.iy1) != 4)
                throw rydscan::ParseError("box: expected ix0,iy0,ix1,iy1 (pixels)");
            box = b;
        }
    } catch (const std::exception& e) {
        std::cerr << "rydscan diff: " << e.what() << '\n';
        return exit_usage;
    }
    try {
        rydscan::FieldMap diff = with_map;
        diff.values = rydscan::background_subtract(with_map.values, without_map.values);
        diff.meta.scene_digest.clear();
        diff.meta.config_digest.clear();
        diff.meta.unresolved.clear();
        rydscan::save_map(diff, out_map_path);
        if (!ppm_path.empty()) rydscan::write_heatmap_ppm(diff.values, ppm_path);

        auto sig_with = rydscan::extract_profile(with_map, axis[0], signal_mm);
        auto sig_without = rydscan::extract_profile(without_map, axis[0], signal_mm);
        auto sig_diff = rydscan::extract_profile(diff, axis[0], signal_mm);
        auto bg_diff = rydscan::extract_profile(diff, axis[0], background_mm);
        double sbr_raw = rydscan::sbr(sig_with.values, sig_without.values);
        double sbr_diff = rydscan::sbr(sig_diff.values, bg_diff.values);

        json report{{"schema", "rydscan-diff-v1"},
                    {"sbr_raw", sbr_raw},
                    {"sbr_diff", sbr_diff},
                    {"signal_coord_mm", sig_diff.fixed_mm},
                    {"background_coord_mm", bg_diff.fixed_mm}};
        if (box) {
            report["snr_box"] = rydscan::snr_box(diff.values, *box);
            report["box"] = {box->ix0, box->iy0, box->ix1, box->iy1};
        }
        if (!out_report_path.empty())
            write_text(out_report_path, report.dump(2) + "\n", "diff report");
        std::cout << "SBR raw = " << sbr_raw << ", SBR diff = " << sbr_diff;
        if (box) std::cout << ", box S/N = " << report["snr_box"].get<double>();
        std::cout << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "rydscan diff: " << e.what() << '\n';
        return exit_numeric;
    }
}

int run_region(double z_mm, double width_mm, double height_mm, double freq_ghz) {
    try {
        rydscan::AntennaAperture aperture{width_mm * 1e-3, height_mm * 1e-3, freq_ghz * 1e9};
        auto region = rydscan::classify_region(z_mm * 1e-3, aperture);
        std::printf("region = %s\n", rydscan::to_string(region));
        std::printf("lambda_mm = %.6g\n", aperture.wavelength() * 1e3);
        std::printf("rdnf_outer_bound_mm = %.6g\n", rydscan::rdnf_outer_bound(aperture) * 1e3);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "rydscan region: " << e.what() << '\n';
        return exit_usage;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rydberg-atom microwave near-field imaging simulator and analysis toolkit"};
    app.require_subcommand(1);

    // spectrum
    auto* sp = app.add_subcommand("spectrum", "Synthesize a Doppler-averaged EIT-AT spectrum");
    std::string sp_config, sp_grid = "-200:0.5:200", sp_out = "spectrum.csv", sp_gnuplot;
    std::optional<double> sp_dp0, sp_orf;
    sp->add_option("--config", sp_config, "Ladder config JSON (defaults: cesium ladder)");
    sp->add_option("--delta-p0-mhz", sp_dp0, "Probe detuning, MHz (overrides config)");
    sp->add_option("--omega-rf-mhz", sp_orf, "Microwave Rabi frequency, MHz (overrides config)");
    sp->add_option("--grid", sp_grid, "Coupling-detuning grid lo:step:hi, MHz");
    sp->add_option("--out", sp_out, "Output CSV path (JSON sidecar written alongside)");
    sp->add_option("--gnuplot", sp_gnuplot, "Base path for gnuplot data/script pair");

    // scan
    auto* sc = app.add_subcommand("scan", "Run a virtual raster scan over a scene");
    std::string sc_scene, sc_config, sc_mode = "direct", sc_ordering = "raster";
    std::string sc_out = "map.csv", sc_ppm;
    double sc_z = 17.5, sc_x0 = 0.0, sc_y0 = 0.0, sc_lx = 0.0, sc_ly = 0.0;
    double sc_dx = 1.0, sc_dy = 1.0, sc_dipole = 1000.0;
    unsigned sc_jobs = 1;
    sc->add_option("--scene", sc_scene, "Scene JSON file")->required();
    sc->add_option("--config", sc_config, "Ladder config JSON (defaults: cesium ladder)");
    sc->add_option("--mode", sc_mode, "direct | spectroscopic");
    sc->add_option("--z-mm", sc_z, "Scan plane height Z, mm");
    sc->add_option("--x0-mm", sc_x0, "Scan origin X, mm");
    sc->add_option("--y0-mm", sc_y0, "Scan origin Y, mm");
    sc->add_option("--lx-mm", sc_lx, "Scan extent along X, mm");
    sc->add_option("--ly-mm", sc_ly, "Scan extent along Y, mm");
    sc->add_option("--dx-mm", sc_dx, "Step along X, mm");
    sc->add_option("--dy-mm", sc_dy, "Step along Y, mm");
    sc->add_option("--ordering", sc_ordering, "raster | serpentine");
    sc->add_option("--jobs", sc_jobs, "Worker count (output is independent of it)");
    sc->add_option("--dipole-ea0", sc_dipole, "RF transition dipole moment, units of e*a0");
    sc->add_option("--out", sc_out, "Output map CSV path");
    sc->add_option("--ppm", sc_ppm, "Optional heatmap PPM path");

    // compare
    auto* cp = app.add_subcommand("compare", "SSIM metric report for two maps");
    std::string cp_a, cp_b, cp_out = "metrics.json", cp_ssim_map, cp_ssim_ppm;
    std::size_t cp_window = 8, cp_stride = 1;
    cp->add_option("--map-a", cp_a, "First map CSV")->required();
    cp->add_option("--map-b", cp_b, "Second map CSV")->required();
    cp->add_option("--window", cp_window, "SSIM window side, pixels");
    cp->add_option("--stride", cp_stride, "SSIM window stride, pixels");
    cp->add_option("--out", cp_out, "Metric report JSON path");
    cp->add_option("--ssim-map", cp_ssim_map, "Optional per-window SSIM grid CSV");
    cp->add_option("--ssim-ppm", cp_ssim_ppm, "Optional per-window SSIM heatmap PPM");

    // resolve
    auto* rs = app.add_subcommand("resolve", "Baseline + Gaussian peak fit of a map profile");
    std::string rs_map, rs_axis = "x", rs_out = "fit.json", rs_gnuplot;
    double rs_coord = 0.0, rs_excl_lo = 0.0, rs_excl_hi = 0.0;
    int rs_npeaks = 2;
    rs->add_option("--map", rs_map, "Map CSV")->required();
    rs->add_option("--axis", rs_axis, "Profile axis: x (fixed Y) or y (fixed X)");
    rs->add_option("--coord-mm", rs_coord, "Fixed coordinate, mm (snapped to grid)");
    rs->add_option("--n-peaks", rs_npeaks, "Number of Gaussian peaks (1 or 2)");
    rs->add_option("--exclude-lo-mm", rs_excl_lo, "Exclusion interval start, mm")->required();
    rs->add_option("--exclude-hi-mm", rs_excl_hi, "Exclusion interval end, mm")->required();
    rs->add_option("--out", rs_out, "Fit report JSON path");
    rs->add_option("--gnuplot", rs_gnuplot, "Base path for gnuplot data/script pair");

    // diff
    auto* df = app.add_subcommand("diff", "Background-subtracted map with SBR and box S/N");
    std::string df_with, df_without, df_box, df_axis = "x";
    std::string df_out_map = "diff.csv", df_report, df_ppm;
    double df_signal = 0.0, df_background = 0.0;
    df->add_option("--map-with", df_with, "Map with the target, CSV")->required();
    df->add_option("--map-without", df_without, "Background map, CSV")->required();
    df->add_option("--box", df_box, "Target box ix0,iy0,ix1,iy1 (pixels, inclusive)");
    df->add_option("--axis", df_axis, "Profile axis for SBR: x or y");
    df->add_option("--signal-coord-mm", df_signal, "Profile through the target, mm");
    df->add_option("--background-coord-mm", df_background, "Background profile, mm");
    df->add_option("--out-map", df_out_map, "Differential map CSV path");
    df->add_option("--out", df_report, "SBR/SNR report JSON path");
    df->add_option("--ppm", df_ppm, "Optional differential heatmap PPM path");

    // region
    auto* rg = app.add_subcommand("region", "Classify an axial distance into antenna field regions");
    double rg_z = 0.0, rg_w = 138.0, rg_h = 107.0, rg_f = 8.556;
    rg->add_option("--z-mm", rg_z, "Axial distance from the aperture, mm")->required();
    rg->add_option("--width-mm", rg_w, "Aperture width, mm");
    rg->add_option("--height-mm", rg_h, "Aperture height, mm");
    rg->add_option("--freq-ghz", rg_f, "Operating frequency, GHz");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    if (sp->parsed())
        return run_spectrum(sp_config, sp_dp0, sp_orf, sp_grid, sp_out, sp_gnuplot);
    if (sc->parsed())
        return run_scan(sc_scene, sc_config, sc_mode, sc_z, sc_x0, sc_y0, sc_lx, sc_ly,
                        sc_dx, sc_dy, sc_ordering, sc_jobs, sc_dipole, sc_out, sc_ppm);
    if (cp->parsed())
        return run_compare(cp_a, cp_b, cp_window, cp_stride, cp_out, cp_ssim_map, cp_ssim_ppm);
    if (rs->parsed())
        return run_resolve(rs_map, rs_axis, rs_coord, rs_npeaks, rs_excl_lo, rs_excl_hi,
                           rs_out, rs_gnuplot);
    if (df->parsed())
        return run_diff(df_with, df_without, df_box, df_axis, df_signal, df_background,
                        df_out_map, df_report, df_ppm);
    if (rg->parsed()) return run_region(rg_z, rg_w, rg_h, rg_f);
    return exit_usage;
}
