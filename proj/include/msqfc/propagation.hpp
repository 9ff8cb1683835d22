#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "msqfc/crystal.hpp"
#include "msqfc/errors.hpp"
#include "msqfc/field.hpp"
#include "msqfc/transform.hpp"

namespace msqfc {

struct SolverParams {
  double h0 = 2.5e-4;         // m
  double tolerance = 1e-6;    // relative local error of the SF field
  double h_min = 1e-7;        // m
  double h_max = 2.5e-3;      // m
  std::size_t max_steps = 20000;  // step attempts, accepted or not

  void validate(double length) const {
    if (!(tolerance > 0.0)) throw ConfigError("solver tolerance must be positive");
    if (!(h_min > 0.0) || !(h_min <= h0) || !(h0 <= h_max) || !(h_max <= length)) {
      throw ConfigError("solver steps must satisfy 0 < h_min <= h0 <= h_max <= crystal length");
    }
    if (max_steps == 0) throw ConfigError("solver max_steps must be >= 1");
  }
};

struct StepRecord {
  double z = 0.0;
  double h = 0.0;
  double flux_signal = 0.0;
  double flux_pump = 0.0;
  double flux_sf = 0.0;
};

struct PropagationResult {
  Field signal;
  Field pump;
  Field sf;
  StepRecord initial;              // fluxes at z = 0
  std::vector<StepRecord> steps;   // one per accepted step
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t forced = 0;          // accepted at h_min despite exceeding tolerance
};

namespace detail {

/// Three envelopes (signal, pump, SF) held in the spectral domain.
struct WaveState {
  std::array<Samples, 3> wave;
  explicit WaveState(std::size_t n = 0) : wave{Samples(n), Samples(n), Samples(n)} {}
};

enum class LinearPart { full, diffraction_only };

/// Exact linear evolution in the SF co-moving frame:
///   dA_i/dz = -(beta1_i - beta1_f) dA_i/dt + (i / 2 k_i)(d_xx + d_yy) A_i
/// which is diagonal on the (kx, ky, omega) grid and separable per axis.
class LinearOperator {
 public:
  LinearOperator(const Grid3D& g, const CrystalParams& c) : grid_(g) {
    const std::array<double, 3> k{c.k_signal(), c.k_pump(), c.k_sf()};
    const std::array<double, 3> b{c.beta1_signal, c.beta1_pump, c.beta1_sf};
    for (std::size_t i = 0; i < 3; ++i) {
      curvature_[i] = 1.0 / (2.0 * k[i]);
      walk_[i] = b[i] - c.beta1_sf;
    }
  }

  /// Per-axis factors of exp(h L_i); the full factor at (ix, iy, it) is
  /// x[ix] * y[iy] * t[it].
  struct Factors {
    std::vector<cplx> x, y, t;
  };

  void factors(std::size_t wave, double h, Factors& f, LinearPart part = LinearPart::full) const {
    const Grid3D& g = grid_;
    const double cv = curvature_[wave];
    const double wv = part == LinearPart::full ? walk_[wave] : 0.0;
    f.x.resize(g.nx());
    f.y.resize(g.ny());
    f.t.resize(g.nt());
    for (std::size_t i = 0; i < g.nx(); ++i) f.x[i] = std::polar(1.0, -h * cv * g.kx(i) * g.kx(i));
    for (std::size_t i = 0; i < g.ny(); ++i) f.y[i] = std::polar(1.0, -h * cv * g.ky(i) * g.ky(i));
    for (std::size_t i = 0; i < g.nt(); ++i) f.t[i] = std::polar(1.0, -h * wv * g.omega(i));
  }

  /// Calls body(j, d) for every flat index j with its linear factor d.
  template <class Body>
  void for_each(const Factors& f, Body&& body) const {
    const std::size_t nt = grid_.nt();
    std::size_t j = 0;
    for (std::size_t ix = 0; ix < grid_.nx(); ++ix) {
      for (std::size_t iy = 0; iy < grid_.ny(); ++iy) {
        const cplx cxy = f.x[ix] * f.y[iy];
        for (std::size_t it = 0; it < nt; ++it, ++j) body(j, cxy * f.t[it]);
      }
    }
  }

  /// A_i <- exp(h L_i) A_i.
  void apply(std::size_t wave, double h, Samples& a, LinearPart part = LinearPart::full) const {
    Factors f;
    factors(wave, h, f, part);
    cplx* p = a.data();
    for_each(f, [p](std::size_t j, cplx d) { p[j] *= d; });
  }

  void apply(double h, WaveState& s, LinearPart part = LinearPart::full) const {
    for (std::size_t i = 0; i < 3; ++i) apply(i, h, s.wave[i], part);
  }

 private:
  Grid3D grid_;
  std::array<double, 3> curvature_{};
  std::array<double, 3> walk_{};
};

/// Interaction-picture fourth-order Runge-Kutta split-step integrator with
/// step-doubling error control.
class SplitStepSolver {
 public:
  SplitStepSolver(const Grid3D& g, const CrystalParams& c)
      : grid_(g),
        crystal_(c),
        linear_(g, c),
        dims_{g.nx(), g.ny(), g.nt()},
        n_(g.size()),
        real_(n_),
        nl_a_(n_),
        ai_(n_),
        acc_(n_),
        tmp_(n_),
        k_(n_) {
    kappa_ = {c.kappa_signal(), c.kappa_pump(), c.kappa_sf()};
    dk_ = c.delta_k();
  }

  const LinearOperator& linear() const { return linear_; }

  /// Spectral nonlinear right-hand side h N(A, z). The unitary DFT scale
  /// factors of the three transforms are folded into the coupling constants.
  void nonlinear(const WaveState& a, double z, double h, WaveState& out) {
    for (std::size_t i = 0; i < 3; ++i) {
      fft::execute_raw(a.wave[i].data(), real_.wave[i].data(), dims_, Direction::inverse);
    }
    const double scale = 1.0 / (static_cast<double>(n_) * std::sqrt(static_cast<double>(n_)));
    const cplx ph = std::polar(1.0, dk_ * z);
    const cplx cs = cplx(0.0, kappa_[0] * h * scale) * ph;
    const cplx cp = cplx(0.0, kappa_[1] * h * scale) * ph;
    const cplx cf = cplx(0.0, kappa_[2] * h * scale) * std::conj(ph);
    cplx* s = real_.wave[0].data();
    cplx* p = real_.wave[1].data();
    cplx* f = real_.wave[2].data();
    for (std::size_t j = 0; j < n_; ++j) {
      const cplx sj = s[j], pj = p[j], fj = f[j];
      s[j] = cs * std::conj(pj) * fj;
      p[j] = cp * std::conj(sj) * fj;
      f[j] = cf * pj * sj;
    }
    for (std::size_t i = 0; i < 3; ++i) {
      fft::execute_raw(real_.wave[i].data(), out.wave[i].data(), dims_, Direction::forward);
    }
  }

  /// One RK4IP step of size h from z. `n_at_a` must hold N(a, z) with unit h.
  ///   a_I = D a,  k1 = D h N(a),  k2 = h N(a_I + k1/2),  k3 = h N(a_I + k2/2),
  ///   k4 = h N(D (a_I + k3)),  out = D (a_I + k1/6 + k2/3 + k3/3) + k4/6
  /// with D = exp(h L / 2).
  void step(const WaveState& a, const WaveState& n_at_a, double z, double h, WaveState& out) {
    const double half = 0.5 * h;
    for (std::size_t i = 0; i < 3; ++i) {
      linear_.factors(i, half, factors_[i]);
      const cplx* av = a.wave[i].data();
      const cplx* na = n_at_a.wave[i].data();
      cplx* ai = ai_.wave[i].data();
      cplx* acc = acc_.wave[i].data();
      cplx* tmp = tmp_.wave[i].data();
      linear_.for_each(factors_[i], [&](std::size_t j, cplx d) {
        const cplx x = av[j] * d;
        const cplx k1 = (h * na[j]) * d;
        ai[j] = x;
        acc[j] = x + k1 / 6.0;
        tmp[j] = x + 0.5 * k1;
      });
    }
    nonlinear(tmp_, z + half, h, k_);  // k2
    for (std::size_t i = 0; i < 3; ++i) {
      const cplx* ai = ai_.wave[i].data();
      const cplx* k = k_.wave[i].data();
      cplx* acc = acc_.wave[i].data();
      cplx* tmp = tmp_.wave[i].data();
      for (std::size_t j = 0; j < n_; ++j) {
        acc[j] += k[j] / 3.0;
        tmp[j] = ai[j] + 0.5 * k[j];
      }
    }
    nonlinear(tmp_, z + half, h, k_);  // k3
    for (std::size_t i = 0; i < 3; ++i) {
      const cplx* ai = ai_.wave[i].data();
      const cplx* k = k_.wave[i].data();
      cplx* acc = acc_.wave[i].data();
      cplx* tmp = tmp_.wave[i].data();
      linear_.for_each(factors_[i], [&](std::size_t j, cplx d) {
        acc[j] += k[j] / 3.0;
        tmp[j] = (ai[j] + k[j]) * d;
      });
    }
    nonlinear(tmp_, z + h, h, k_);  // k4
    for (std::size_t i = 0; i < 3; ++i) {
      const cplx* acc = acc_.wave[i].data();
      const cplx* k = k_.wave[i].data();
      cplx* o = out.wave[i].data();
      linear_.for_each(factors_[i], [&](std::size_t j, cplx d) { o[j] = acc[j] * d + k[j] / 6.0; });
    }
  }

  double cell() const { return grid_.dx() * grid_.dy() * grid_.dt(); }

  StepRecord record(const WaveState& s, double z, double h) const {
    const double dv = cell();
    const auto n2 = [&](const Samples& v) {
      double acc = 0.0;
      for (const cplx& x : v) acc += std::norm(x);
      return acc * dv;
    };
    return {z, h, photon_flux(n2(s.wave[0]), crystal_.n_signal, crystal_.omega_signal()),
            photon_flux(n2(s.wave[1]), crystal_.n_pump, crystal_.omega_pump()),
            photon_flux(n2(s.wave[2]), crystal_.n_sf, crystal_.omega_sf())};
  }

  PropagationResult run(const Field& signal, const Field& pump, const SolverParams& params) {
    WaveState state(n_);
    const std::array<const Field*, 2> inputs{&signal, &pump};
    for (std::size_t i = 0; i < 2; ++i) {
      std::copy(inputs[i]->samples().begin(), inputs[i]->samples().end(), state.wave[i].begin());
      fft::execute(state.wave[i], dims_, Direction::forward);
      if (crystal_.waist_position != 0.0) {
        linear_.apply(i, -crystal_.waist_position, state.wave[i], LinearPart::diffraction_only);
      }
    }

    PropagationResult result{signal, pump, Field::zeros(grid_, Rank::spatiotemporal3d, Carrier::sf), {}, {}};
    result.initial = record(state, 0.0, 0.0);

    WaveState big(n_), mid(n_), small(n_), n_mid(n_);
    const double length = crystal_.length;
    double z = 0.0;
    double h = params.h0;
    std::size_t attempts = 0;
    while (z < length) {
      if (attempts++ >= params.max_steps) {
        throw ConvergenceError("step controller exhausted " + std::to_string(params.max_steps) +
                               " steps at z = " + std::to_string(z) + " m");
      }
      const bool last = z + h >= length * (1.0 - 1e-12);
      const double hs = last ? length - z : h;

      nonlinear(state, z, 1.0, nl_a_);
      step(state, nl_a_, z, hs, big);
      step(state, nl_a_, z, 0.5 * hs, mid);
      nonlinear(mid, z + 0.5 * hs, 1.0, n_mid);
      step(mid, n_mid, z + 0.5 * hs, 0.5 * hs, small);

      double diff = 0.0, ref = 0.0;
      for (std::size_t j = 0; j < n_; ++j) {
        diff += std::norm(big.wave[2][j] - small.wave[2][j]);
        ref += std::norm(small.wave[2][j]);
      }
      if (!std::isfinite(diff) || !std::isfinite(ref)) {
        throw NumericBlowupError("non-finite field after step at z = " + std::to_string(z) + " m", z);
      }
      const double err = ref > 0.0 ? std::sqrt(diff / ref) : (diff > 0.0 ? HUGE_VAL : 0.0);
      const double factor =
          err > 0.0 ? std::clamp(0.9 * std::pow(params.tolerance / err, 0.2), 0.5, 2.0) : 2.0;

      const bool at_floor = hs <= params.h_min * (1.0 + 1e-12);
      if (err <= params.tolerance || at_floor) {
        if (err > params.tolerance) ++result.forced;
        std::swap(state, small);
        z = last ? length : z + hs;
        ++result.accepted;
        result.steps.push_back(record(state, z, hs));
        if (!last) h = std::clamp(hs * factor, params.h_min, params.h_max);
      } else {
        ++result.rejected;
        h = std::max(hs * factor, params.h_min);
      }
    }

    std::array<Field, 3> out{Field::zeros(grid_, Rank::spatiotemporal3d),
                             Field::zeros(grid_, Rank::spatiotemporal3d),
                             Field::zeros(grid_, Rank::spatiotemporal3d)};
    const std::array<Carrier, 3> carriers{Carrier::signal, Carrier::pump, Carrier::sf};
    for (std::size_t i = 0; i < 3; ++i) {
      fft::execute(state.wave[i], dims_, Direction::inverse);
      out[i] = Field(grid_, Rank::spatiotemporal3d, std::move(state.wave[i]), carriers[i]);
    }
    result.signal = std::move(out[0]);
    result.pump = std::move(out[1]);
    result.sf = std::move(out[2]);
    return result;
  }

 private:
  Grid3D grid_;
  CrystalParams crystal_;
  LinearOperator linear_;
  std::array<std::size_t, 3> dims_;
  std::size_t n_;
  std::array<double, 3> kappa_{};
  double dk_ = 0.0;
  WaveState real_, nl_a_, ai_, acc_, tmp_, k_;
  std::array<LinearOperator::Factors, 3> factors_;
};

inline void require_propagation_inputs(const Field& signal, const Field& pump) {
  if (signal.rank() != Rank::spatiotemporal3d || pump.rank() != Rank::spatiotemporal3d) {
    throw ShapeError("propagation needs spatiotemporal-3D signal and pump fields");
  }
  if (!(signal.grid() == pump.grid())) throw ShapeError("signal and pump grids differ");
  if (signal.domain() != Domain::direct || pump.domain() != Domain::direct) {
    throw ShapeError("propagation inputs must be direct-space fields");
  }
}

}  // namespace detail

/// Integrates the three coupled envelope equations from the entrance face to
/// z = L. The SF envelope starts at zero. Fields are expressed in the SF
/// co-moving frame; returned envelopes are at the exit face.
inline PropagationResult propagate(const Field& signal, const Field& pump,
                                   const CrystalParams& crystal, const SolverParams& solver) {
  detail::require_propagation_inputs(signal, pump);
  crystal.validate();
  solver.validate(crystal.length);
  detail::SplitStepSolver s(signal.grid(), crystal);
  return s.run(signal, pump, solver);
}

}  // namespace msqfc
