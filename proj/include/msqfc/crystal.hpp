#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "msqfc/errors.hpp"

namespace msqfc {

inline constexpr double kSpeedOfLight = 299792458.0;      // m/s
inline constexpr double kHbar = 1.054571817e-34;          // J s

/// Quasi-phase-matched chi(2) crystal. `chi` is the effective coupling with
/// the first-order QPM factor already folded in. The SF carrier frequency is
/// derived as omega_s + omega_p, so energy conservation holds by
/// construction.
struct CrystalParams {
  double chi = 0.0;              // m/V
  double poling_period = 0.0;    // m
  double length = 0.0;           // m
  double wavelength_signal = 0.0;  // m, vacuum
  double wavelength_pump = 0.0;    // m, vacuum
  double n_signal = 1.0;
  double n_pump = 1.0;
  double n_sf = 1.0;
  double beta1_signal = 0.0;     // inverse group velocities, s/m
  double beta1_pump = 0.0;
  double beta1_sf = 0.0;
  /// Distance of the common beam waist from the entrance face. Input fields
  /// are given at the waist and launched by linear back-propagation.
  double waist_position = 0.0;   // m

  double omega_signal() const { return 2.0 * std::numbers::pi * kSpeedOfLight / wavelength_signal; }
  double omega_pump() const { return 2.0 * std::numbers::pi * kSpeedOfLight / wavelength_pump; }
  double omega_sf() const { return omega_signal() + omega_pump(); }
  double wavelength_sf() const { return 2.0 * std::numbers::pi * kSpeedOfLight / omega_sf(); }

  double k_signal() const { return n_signal * omega_signal() / kSpeedOfLight; }
  double k_pump() const { return n_pump * omega_pump() / kSpeedOfLight; }
  double k_sf() const { return n_sf * omega_sf() / kSpeedOfLight; }

  /// k_s + k_p - k_f - 2 pi / Lambda.
  double delta_k() const {
    return k_signal() + k_pump() - k_sf() - 2.0 * std::numbers::pi / poling_period;
  }

  /// Right-hand-side coefficients kappa_i = omega_i chi / (c n_i) of
  /// dA_i/dz = i kappa_i (product of the other two envelopes).
  double kappa_signal() const { return omega_signal() * chi / (kSpeedOfLight * n_signal); }
  double kappa_pump() const { return omega_pump() * chi / (kSpeedOfLight * n_pump); }
  double kappa_sf() const { return omega_sf() * chi / (kSpeedOfLight * n_sf); }

  void validate() const {
    const auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string("crystal ") + name + " must be positive");
      }
    };
    positive(poling_period, "poling_period");
    positive(length, "length");
    positive(wavelength_signal, "wavelength_signal");
    positive(wavelength_pump, "wavelength_pump");
    if (!std::isfinite(chi)) throw ConfigError("crystal chi must be finite");
    if (n_signal < 1.0 || n_pump < 1.0 || n_sf < 1.0) {
      throw ConfigError("crystal refractive indices must be >= 1");
    }
    if (!std::isfinite(beta1_signal) || !std::isfinite(beta1_pump) || !std::isfinite(beta1_sf)) {
      throw ConfigError("crystal inverse group velocities must be finite");
    }
    if (!std::isfinite(waist_position)) throw ConfigError("crystal waist_position must be finite");
  }

  /// SF index for which delta_k() vanishes with the other parameters fixed.
  double phase_matched_n_sf() const {
    return (k_signal() + k_pump() - 2.0 * std::numbers::pi / poling_period) * kSpeedOfLight /
           omega_sf();
  }

  /// 5% MgO:PPLN, 10 mm, 19.36 um period, 1558 nm signal, 1545 nm pump.
  /// n_sf is set for delta_k = 0. Group indices give ~0.2 ps SF walk-off over
  /// the crystal.
  static CrystalParams ppln_defaults() {
    CrystalParams c;
    c.chi = 3.2e-11;
    c.poling_period = 19.36e-6;
    c.length = 10e-3;
    c.wavelength_signal = 1558e-9;
    c.wavelength_pump = 1545e-9;
    c.n_signal = 2.1379;
    c.n_pump = 2.1383;
    c.beta1_signal = 2.1836 / kSpeedOfLight;
    c.beta1_pump = 2.1840 / kSpeedOfLight;
    c.beta1_sf = 2.1896 / kSpeedOfLight;
    c.waist_position = 5e-3;
    c.n_sf = c.phase_matched_n_sf();
    return c;
  }
};

/// Photon flux n ||A||^2 / (hbar omega) of an envelope of squared norm `norm2`.
/// Relative units; only ratios and conservation are meaningful.
inline double photon_flux(double norm2, double n, double omega) { return n * norm2 / (kHbar * omega); }

}  // namespace msqfc
