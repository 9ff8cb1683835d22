#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "msqfc/io.hpp"
#include "msqfc/metrics.hpp"
#include "msqfc/modes.hpp"
#include "msqfc/perturbative.hpp"
#include "msqfc/propagation.hpp"

using namespace msqfc;

namespace {

constexpr double kWs = 44.9e-6, kWp = 41.4e-6, kTau = 0.3e-12;

CrystalParams no_walkoff() {
  CrystalParams c = CrystalParams::ppln_defaults();
  c.beta1_signal = c.beta1_pump = c.beta1_sf;
  return c;
}

Field pump_at(const Field& unit, double peak) { return unit.scaled(peak / unit.max_abs()).with_carrier(Carrier::pump); }

double relative_l2(const Field& a, const Field& b) {
  double d = 0.0, n = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += std::norm(a[i] - b[i]);
    n += std::norm(b[i]);
  }
  return std::sqrt(d / n);
}

SolverParams fast_solver() {
  SolverParams s;
  s.tolerance = 1e-5;
  s.h_max = 5e-3;
  return s;
}

}  // namespace

TEST(Crystal, DefaultsArePhaseMatchedAndValid) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  EXPECT_NO_THROW(c.validate());
  EXPECT_LT(std::abs(c.delta_k()), 1e-6);
  EXPECT_NEAR(c.omega_sf(), c.omega_signal() + c.omega_pump(), 1e-3);
  CrystalParams bad = c;
  bad.length = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = c;
  bad.n_sf = 0.5;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Solver, ParameterValidation) {
  SolverParams s;
  EXPECT_NO_THROW(s.validate(10e-3));
  s.h_max = 20e-3;
  EXPECT_THROW(s.validate(10e-3), ConfigError);
  s = SolverParams{};
  s.tolerance = 0.0;
  EXPECT_THROW(s.validate(10e-3), ConfigError);
  s = SolverParams{};
  s.h_min = 1e-3;
  EXPECT_THROW(s.validate(10e-3), ConfigError);
}

TEST(Propagate, WithoutPumpTheSignalDiffractsAsAGaussianBeam) {
  const CrystalParams c = no_walkoff();
  const Grid3D g = make_grid(64, 64, 8, 11 * kWs, 11 * kWs, 4e-12);
  const Field t = temporal_mode({kTau, 0.0, 0}, g);
  const Field s = compose(lg_mode({0, 0, kWs}, g), t).scaled(1e-3);
  const Field p = Field::zeros(g, Rank::spatiotemporal3d);
  const PropagationResult r = propagate(s, p, c, fast_solver());
  EXPECT_EQ(r.sf.max_abs(), 0.0);
  EXPECT_NEAR(r.steps.back().flux_signal / r.initial.flux_signal, 1.0, 1e-12);

  // Paraxial Gaussian beam at distance z past the focus:
  // A = A0 / (1 + i z/zR) exp(-r^2 / (w0^2 (1 + i z/zR))), zR = k w0^2 / 2.
  const double z = c.length - c.waist_position;
  const double zr = c.k_signal() * kWs * kWs / 2.0;
  const cplx q(1.0, z / zr);
  const double a0 = s.at(32, 32, 4).real();
  double worst = 0.0;
  for (std::size_t ix = 16; ix < 48; ++ix)
    for (std::size_t iy = 16; iy < 48; ++iy) {
      const double r2 = g.x(ix) * g.x(ix) + g.y(iy) * g.y(iy);
      const cplx expect = a0 / q * std::exp(-r2 / (kWs * kWs * q));
      worst = std::max(worst, std::abs(r.signal.at(ix, iy, 4) - expect) / a0);
    }
  EXPECT_LT(worst, 1e-6);
}

TEST(Propagate, GroupVelocityMismatchShiftsTheSignalInTime) {
  CrystalParams c = no_walkoff();
  c.beta1_signal = c.beta1_sf + 0.1e-12 / c.length;  // 0.1 ps over the crystal
  const Grid3D g = make_grid(8, 8, 128, 40 * kWs, 40 * kWs, 4e-12);
  const Field s = compose(lg_mode({0, 0, 8 * kWs}, g), temporal_mode({kTau, 0.0, 0}, g)).scaled(1e-3);
  const PropagationResult r = propagate(s, Field::zeros(g, Rank::spatiotemporal3d), c, fast_solver());
  // centroid of |A|^2 along t at the beam centre
  const Field prof = temporal_profile(r.signal, 4, 4);
  double m = 0.0, w = 0.0;
  for (std::size_t it = 0; it < g.nt(); ++it) {
    m += std::norm(prof[it]) * g.t(it);
    w += std::norm(prof[it]);
  }
  EXPECT_NEAR(m / w, 0.1e-12, 1e-16);
}

TEST(Propagate, ManleyRoweSumsAreConservedUnderDepletion) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(32, 32, 32, 11 * kWs, 11 * kWs, 4e-12);
  const Field s = compose(lg_mode({0, 0, kWs}, g), temporal_mode({kTau, -0.3e-12, 0}, g)).scaled(2e-5);
  const Field p = pump_at(compose(lg_mode({0, 0, kWp}, g), temporal_mode({kTau, 0.3e-12, 0}, g)), 3e7);
  SolverParams sp;
  sp.tolerance = 1e-7;
  const PropagationResult r = propagate(s, p, c, sp);
  const double conversion = r.steps.back().flux_sf / r.initial.flux_signal;
  EXPECT_GT(conversion, 1e-3);  // strong enough that depletion matters
  const ManleyRoweDrift d = manley_rowe_drift(r);
  EXPECT_LT(d.signal, 1e-6);
  EXPECT_LT(d.pump, 1e-6);
  EXPECT_EQ(r.forced, 0u);
  // energy: omega_s N_s + omega_p N_p + omega_f N_f
  const auto energy = [&](const StepRecord& st) {
    return c.omega_signal() * st.flux_signal + c.omega_pump() * st.flux_pump + c.omega_sf() * st.flux_sf;
  };
  const double e0 = energy(r.initial);
  for (const auto& st : r.steps) EXPECT_LT(std::abs(energy(st) - e0) / e0, 1e-6);
}

TEST(Propagate, HalvingTheToleranceMovesTheSfFluxLessThanTheTolerance) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(32, 32, 16, 11 * kWs, 11 * kWs, 4e-12);
  const Field s = compose(lg_mode({0, 0, kWs}, g), temporal_mode({kTau, -0.3e-12, 0}, g)).scaled(1e-9);
  const Field p = pump_at(compose(lg_mode({0, 0, kWp}, g), temporal_mode({kTau, 0.3e-12, 0}, g)), 1e5);
  for (double tol : {1e-3, 1e-4, 1e-5}) {
    SolverParams coarse;
    coarse.tolerance = tol;
    SolverParams fine = coarse;
    fine.tolerance = tol / 2;
    const double a = propagate(s, p, c, coarse).steps.back().flux_sf;
    const double b = propagate(s, p, c, fine).steps.back().flux_sf;
    EXPECT_LT(std::abs(a - b) / b, tol) << "tolerance " << tol;
  }
}

TEST(Propagate, OppositeOamIsSelectedBy40Db) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(64, 64, 8, 11 * kWs, 11 * kWs, 4e-12);
  const Field t = temporal_mode({kTau, 0.0, 0}, g);
  const Detector det{Detector::Kind::single_mode, 30.4e-6};
  for (int l = 1; l <= 3; ++l) {
    const Field p = pump_at(compose(lg_mode({l, 0, kWp}, g), t), 1e5);
    const auto count = [&](int ls) {
      const Field s = compose(lg_mode({ls, 0, kWs}, g), t).scaled(1e-9);
      return detected_count(propagate(s, p, c, fast_solver()).sf, det, c);
    };
    EXPECT_GE(10.0 * std::log10(count(-l) / count(l)), 40.0) << "l = " << l;
  }
}

TEST(Propagate, MatchesPerturbativeOracleInTheWeakSignalLimit) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(32, 32, 32, 11 * kWs, 11 * kWs, 4e-12);
  const Field s = compose(lg_mode({1, 0, kWs}, g), temporal_mode({kTau, -0.3e-12, 0}, g)).scaled(1e-9);
  const Field p = pump_at(compose(lg_mode({-1, 0, kWp}, g), temporal_mode({kTau, 0.3e-12, 0}, g)), 1e5);
  SolverParams sp;
  sp.tolerance = 1e-6;
  const PropagationResult r = propagate(s, p, c, sp);
  EXPECT_LT(1.0 - r.steps.back().flux_signal / r.initial.flux_signal, 1e-4);
  const Field o = perturbative_sfg(s, p, c, 128);
  EXPECT_LT(relative_l2(r.sf, o), 1e-2);
}

TEST(Oracle, SameSignOamIsNotDetected) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(32, 32, 16, 11 * kWs, 11 * kWs, 4e-12);
  const Field t = temporal_mode({kTau, 0.0, 0}, g);
  const Detector det{Detector::Kind::single_mode, 30.4e-6};
  const Field p = pump_at(compose(lg_mode({1, 0, kWp}, g), t), 1e5);
  const Field matched = compose(lg_mode({-1, 0, kWs}, g), t).scaled(1e-9);
  const Field same = compose(lg_mode({1, 0, kWs}, g), t).scaled(1e-9);
  const double a = detected_count(perturbative_sfg(matched, p, c, 64), det, c);
  const double b = detected_count(perturbative_sfg(same, p, c, 64), det, c);
  EXPECT_LT(b / a, 1e-6);
}

TEST(Oracle, LinearInTheSignal) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(16, 16, 16, 11 * kWs, 11 * kWs, 4e-12);
  const Field t = temporal_mode({kTau, 0.0, 0}, g);
  const Field p = pump_at(compose(lg_mode({0, 0, kWp}, g), t), 1e5);
  const Field s = compose(lg_mode({0, 0, kWs}, g), t).scaled(1e-9);
  const Field a = perturbative_sfg(s, p, c, 64);
  const Field b = perturbative_sfg(s.scaled(2.0), p, c, 64);
  EXPECT_LT(relative_l2(b, a.scaled(2.0)), 1e-12);
  EXPECT_THROW(perturbative_sfg(s, p, c, 32), ConfigError);
}

TEST(Propagate, PhaseMismatchFollowsSincSquared) {
  // Wide collimated beams and no walk-off reduce the SF yield to
  // |int_0^L exp(i dk z) dz|^2 = L^2 sinc^2(dk L / 2).
  const CrystalParams base = no_walkoff();
  const double w = 2e-3;
  const Grid3D g = make_grid(32, 32, 8, 11 * w, 11 * w, 4e-12);
  const Field t = temporal_mode({kTau, 0.0, 0}, g);
  const Field s = compose(lg_mode({0, 0, w}, g), t).scaled(1e-9);
  const Field p = pump_at(compose(lg_mode({0, 0, w}, g), t), 1e5);
  SolverParams sp;
  sp.tolerance = 1e-7;
  const auto yield = [&](double dk) {
    CrystalParams c = base;
    c.n_sf = base.n_sf + dk * kSpeedOfLight / base.omega_sf();
    const PropagationResult r = propagate(s, p, c, sp);
    return r.steps.back().flux_sf;
  };
  const double y0 = yield(0.0);
  const double L = base.length;
  const double half = yield(std::numbers::pi / L);
  EXPECT_NEAR(half / y0, std::pow(2.0 / std::numbers::pi, 2), 2e-3);
  const double null = yield(2.0 * std::numbers::pi / L);
  EXPECT_LT(null / y0, 1e-3);
}

TEST(Propagate, InputChecks) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(8, 8, 8, 11 * kWs, 11 * kWs, 4e-12);
  const Grid3D h = make_grid(16, 8, 8, 11 * kWs, 11 * kWs, 4e-12);
  const Field a = Field::zeros(g, Rank::spatiotemporal3d);
  EXPECT_THROW(propagate(Field::zeros(g, Rank::spatial2d), a, c, SolverParams{}), ShapeError);
  EXPECT_THROW(propagate(a, Field::zeros(h, Rank::spatiotemporal3d), c, SolverParams{}), ShapeError);
  EXPECT_THROW(propagate(transform(a, Direction::forward), a, c, SolverParams{}), ShapeError);
  SolverParams bad;
  bad.h_max = 1.0;
  EXPECT_THROW(propagate(a, a, c, bad), ConfigError);
}

TEST(Propagate, StepBudgetExhaustionIsAConvergenceError) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(16, 16, 16, 11 * kWs, 11 * kWs, 4e-12);
  const Field s = compose(lg_mode({0, 0, kWs}, g), temporal_mode({kTau, 0.0, 0}, g)).scaled(1e-9);
  const Field p = pump_at(compose(lg_mode({0, 0, kWp}, g), temporal_mode({kTau, 0.0, 0}, g)), 1e5);
  SolverParams sp;
  sp.h_min = 1e-6;
  sp.h0 = 1e-5;
  sp.h_max = 1e-5;
  sp.max_steps = 50;
  EXPECT_THROW(propagate(s, p, c, sp), ConvergenceError);
}

TEST(Propagate, OverflowIsReportedWithLastGoodPosition) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(16, 16, 16, 11 * kWs, 11 * kWs, 4e-12);
  const Field s = compose(lg_mode({0, 0, kWs}, g), temporal_mode({kTau, 0.0, 0}, g)).scaled(1e10);
  const Field p = pump_at(compose(lg_mode({0, 0, kWp}, g), temporal_mode({kTau, 0.0, 0}, g)), 1e18);
  SolverParams sp;
  sp.h_min = 1e-5;
  sp.h0 = 1e-3;
  sp.h_max = 1e-3;
  try {
    propagate(s, p, c, sp);
    FAIL() << "expected a numeric blowup";
  } catch (const NumericBlowupError& e) {
    EXPECT_GE(e.last_good_z(), 0.0);
    EXPECT_LT(e.last_good_z(), c.length);
  }
}

TEST(Detection, SingleModeCountOfAMatchedGaussianEqualsTotalFlux) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const double wd = 30.4e-6;
  const Grid3D g = make_grid(64, 64, 16, 11 * kWs, 11 * kWs, 4e-12);
  const Field f = compose(lg_mode({0, 0, wd}, g), temporal_mode({kTau, 0.0, 0}, g)).scaled(cplx(2.0, 1.0));
  const double single = detected_count(f, {Detector::Kind::single_mode, wd}, c);
  const double total = detected_count(f, {Detector::Kind::total, 0.0}, c);
  EXPECT_NEAR(single / total, 1.0, 1e-12);
  const Field v = compose(lg_mode({1, 0, wd}, g), temporal_mode({kTau, 0.0, 0}, g));
  EXPECT_LT(detected_count(v, {Detector::Kind::single_mode, wd}, c), 1e-12 * detected_count(v, {Detector::Kind::total, 0.0}, c));
  EXPECT_THROW(detected_count(f, {Detector::Kind::single_mode, 0.0}, c), ConfigError);
}

TEST(Tomography, SingleCellIsZeroDbAndColumnsPermute) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(32, 32, 16, 11 * kWs, 11 * kWs, 4e-12);
  const Field t = temporal_mode({kTau, 0.0, 0}, g);
  const auto sig = [&](int l) { return LabeledField{"s" + std::to_string(l), compose(lg_mode({l, 0, kWs}, g), t).scaled(1e-9)}; };
  const auto pump = [&](int l) { return LabeledField{"p" + std::to_string(l), pump_at(compose(lg_mode({l, 0, kWp}, g), t), 1e5)}; };
  SolverParams sp = fast_solver();
  sp.tolerance = 1e-4;
  const Detector det{Detector::Kind::single_mode, 30.4e-6};

  const TomographyMatrix one = tomography_matrix({sig(1)}, {pump(-1)}, c, sp, det);
  EXPECT_EQ(one.db[0][0], 0.0);

  const TomographyMatrix m = tomography_matrix({sig(1), sig(-1)}, {pump(-1), pump(1)}, c, sp, det, 2);
  const TomographyMatrix swapped = tomography_matrix({sig(-1), sig(1)}, {pump(-1), pump(1)}, c, sp, det);
  for (std::size_t r = 0; r < 2; ++r) {
    EXPECT_GT(m.db[r][r] - m.db[r][1 - r], 20.0);
    EXPECT_EQ(m.counts[r][0], swapped.counts[r][1]);
    EXPECT_EQ(m.counts[r][1], swapped.counts[r][0]);
  }
  EXPECT_THROW(tomography_matrix({}, {pump(1)}, c, sp, det), ConfigError);
}

TEST(Tomography, FailingCellIsNamed) {
  const CrystalParams c = CrystalParams::ppln_defaults();
  const Grid3D g = make_grid(16, 16, 16, 11 * kWs, 11 * kWs, 4e-12);
  const Field t = temporal_mode({kTau, 0.0, 0}, g);
  const LabeledField s{"s", compose(lg_mode({0, 0, kWs}, g), t).scaled(1e-9)};
  const LabeledField ok{"ok", pump_at(compose(lg_mode({0, 0, kWp}, g), t), 1e5)};
  const LabeledField bad{"bad", Field::zeros(make_grid(8, 16, 16, 11 * kWs, 11 * kWs, 4e-12), Rank::spatiotemporal3d)};
  SolverParams sp = fast_solver();
  sp.tolerance = 1e-3;
  try {
    tomography_matrix({s}, {ok, bad}, c, sp, {Detector::Kind::total, 0.0});
    FAIL() << "expected a cell error";
  } catch (const TomographyCellError& e) {
    EXPECT_EQ(e.row(), 1u);
    EXPECT_EQ(e.col(), 0u);
  }
}
