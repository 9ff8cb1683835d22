#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "msqfc/crystal.hpp"
#include "msqfc/errors.hpp"
#include "msqfc/field.hpp"
#include "msqfc/transform.hpp"

namespace msqfc {

/// First-order SF field at the exit face: undepleted signal and pump, each
/// propagated linearly, with the SF source integrated over z by the
/// trapezoid rule on nz intervals and every contribution diffracted to z = L.
/// Shares no stepping code with propagate(); only the DFT is common.
inline Field perturbative_sfg(const Field& signal, const Field& pump, const CrystalParams& c,
                              std::size_t nz) {
  if (nz < 64) throw ConfigError("perturbative_sfg needs nz >= 64");
  if (signal.rank() != Rank::spatiotemporal3d || pump.rank() != Rank::spatiotemporal3d ||
      !(signal.grid() == pump.grid())) {
    throw ShapeError("perturbative_sfg needs 3D signal and pump on one grid");
  }
  c.validate();
  const Grid3D& g = signal.grid();
  const std::size_t n = g.size();
  const std::array<std::size_t, 3> dims{g.nx(), g.ny(), g.nt()};

  Samples s0(signal.samples().begin(), signal.samples().end());
  Samples p0(pump.samples().begin(), pump.samples().end());
  fft::execute(s0, dims, Direction::forward);
  fft::execute(p0, dims, Direction::forward);

  const double ks = c.k_signal(), kp = c.k_pump(), kf = c.k_sf();
  const double ws = c.beta1_signal - c.beta1_sf;
  const double wp = c.beta1_pump - c.beta1_sf;
  const double L = c.length;
  const double dz = L / static_cast<double>(nz);

  Samples s(n), p(n), src(n), acc(n);
  for (std::size_t iz = 0; iz <= nz; ++iz) {
    const double z = dz * static_cast<double>(iz);
    const double zd = z - c.waist_position;  // diffraction distance from the waist
    std::size_t j = 0;
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
      for (std::size_t iy = 0; iy < g.ny(); ++iy) {
        const double kt2 = g.kx(ix) * g.kx(ix) + g.ky(iy) * g.ky(iy);
        for (std::size_t it = 0; it < g.nt(); ++it, ++j) {
          const double w = g.omega(it);
          s[j] = s0[j] * std::polar(1.0, -(kt2 / (2.0 * ks) * zd + ws * w * z));
          p[j] = p0[j] * std::polar(1.0, -(kt2 / (2.0 * kp) * zd + wp * w * z));
        }
      }
    }
    fft::execute(s, dims, Direction::inverse);
    fft::execute(p, dims, Direction::inverse);
    const double weight = (iz == 0 || iz == nz) ? 0.5 * dz : dz;
    const cplx coeff = cplx(0.0, c.kappa_sf() * weight) * std::polar(1.0, -c.delta_k() * z);
    for (std::size_t i = 0; i < n; ++i) src[i] = coeff * s[i] * p[i];
    fft::execute(src, dims, Direction::forward);
    j = 0;
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
      for (std::size_t iy = 0; iy < g.ny(); ++iy) {
        const double kt2 = g.kx(ix) * g.kx(ix) + g.ky(iy) * g.ky(iy);
        const cplx d = std::polar(1.0, -kt2 / (2.0 * kf) * (L - z));
        for (std::size_t it = 0; it < g.nt(); ++it, ++j) acc[j] += d * src[j];
      }
    }
  }
  fft::execute(acc, dims, Direction::inverse);
  return Field(g, Rank::spatiotemporal3d, std::move(acc), Carrier::sf);
}

}  // namespace msqfc
