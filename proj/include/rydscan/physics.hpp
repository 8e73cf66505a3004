// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>

namespace rydscan {

namespace constants {
inline constexpr double planck_h = 6.62607015e-34;          // J s (exact SI)
inline constexpr double light_speed = 299792458.0;          // m/s (exact SI)
inline constexpr double atomic_dipole = 8.4783536255e-30;   // e*a0, C m
inline constexpr double boltzmann_kb = 1.380649e-23;        // J/K (exact SI)
/// Working default for the 44D5/2 -> 45P3/2 microwave transition dipole;
/// a configuration value, overridable everywhere it is consumed.
inline constexpr double default_rf_dipole = 1000.0 * atomic_dipole; // C m
} // namespace constants

struct PhysConstants {
    double h = constants::planck_h;
    double c = constants::light_speed;
    double e_a0 = constants::atomic_dipole;
};

/// Probe/coupling wavelength pair. All Doppler terms are expressed in
/// ordinary frequency: wavenumber k = 1/lambda so that k*v is in Hz.
struct WaveGeometry {
    double lambda_p = 852e-9; // m
    double lambda_c = 510e-9; // m

    double k_p() const { return 1.0 / lambda_p; } // 1/m
    double k_c() const { return 1.0 / lambda_c; } // 1/m

    void validate() const {
        if (!(lambda_p > 0.0) || !(lambda_c > 0.0))
            throw std::domain_error("WaveGeometry: wavelengths must be positive");
    }

    static WaveGeometry cesium_ladder() { return WaveGeometry{852e-9, 510e-9}; }
};

/// Rectangular radiating aperture; D is the maximum linear aperture,
/// i.e. the diagonal.
struct AntennaAperture {
    double width = 0.0;     // m
    double height = 0.0;    // m
    double frequency = 0.0; // Hz

    double diagonal() const { return std::hypot(width, height); }
    double wavelength() const {
        if (!(frequency > 0.0))
            throw std::domain_error("AntennaAperture: frequency must be positive");
        return constants::light_speed / frequency;
    }

    void validate() const {
        if (!(width > 0.0) || !(height > 0.0))
            throw std::domain_error("AntennaAperture: degenerate aperture (D = 0)");
        if (!(frequency > 0.0))
            throw std::domain_error("AntennaAperture: frequency must be positive");
    }
};

enum class FieldRegion { ReactiveNearField, RadiatingNearField, FarField };

inline const char* to_string(FieldRegion r) {
    switch (r) {
    case FieldRegion::ReactiveNearField: return "reactive-near-field";
    case FieldRegion::RadiatingNearField: return "radiating-near-field";
    default: return "far-field";
    }
}

/// Outer bound of the radiating near field, 2 D^2 / lambda.
inline double rdnf_outer_bound(const AntennaAperture& aperture) {
    aperture.validate();
    double lambda = aperture.wavelength();
    double d = aperture.diagonal();
    return 2.0 * d * d / lambda;
}

/// Classifies an axial distance Z > 0 in front of the aperture.
/// Boundaries are half-open and belong to the farther region:
/// Z < lambda -> reactive, lambda <= Z < 2D^2/lambda -> radiating,
/// otherwise far field.
inline FieldRegion classify_region(double z, const AntennaAperture& aperture) {
    aperture.validate();
    if (!(z > 0.0)) throw std::domain_error("classify_region: Z must be positive");
    double lambda = aperture.wavelength();
    if (z < lambda) return FieldRegion::ReactiveNearField;
    if (z < rdnf_outer_bound(aperture)) return FieldRegion::RadiatingNearField;
    return FieldRegion::FarField;
}

/// |E| = h * delta_f / dipole: field magnitude from an Autler-Townes
/// splitting in Hz, with the transition dipole moment in C m.
inline double at_splitting_to_field(double delta_f, double dipole) {
    if (!(dipole > 0.0))
        throw std::domain_error("at_splitting_to_field: dipole must be positive");
    if (delta_f < 0.0)
        throw std::domain_error("at_splitting_to_field: negative splitting");
    return constants::planck_h * delta_f / dipole;
}

/// Exact inverse of at_splitting_to_field (forward path of the simulator).
inline double field_to_at_splitting(double field, double dipole) {
    if (!(dipole > 0.0))
        throw std::domain_error("field_to_at_splitting: dipole must be positive");
    if (field < 0.0)
        throw std::domain_error("field_to_at_splitting: negative field");
    return field * dipole / constants::planck_h;
}

} // namespace rydscan
