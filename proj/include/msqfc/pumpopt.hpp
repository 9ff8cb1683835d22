#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "msqfc/crystal.hpp"
#include "msqfc/errors.hpp"
#include "msqfc/field.hpp"
#include "msqfc/metrics.hpp"
#include "msqfc/modes.hpp"
#include "msqfc/parallel.hpp"
#include "msqfc/propagation.hpp"

namespace msqfc {

/// Ordered pump basis: LG spatial modes at a common waist, and temporal
/// functions (Hermite-Gauss orders and/or delayed Gaussians).
struct PumpBasis {
  double waist = 0.0;
  std::vector<LGSpec> spatial;
  std::vector<TemporalSpec> temporal;
  friend bool operator==(const PumpBasis&, const PumpBasis&) = default;
};

/// All (l, p) with l in [-l_max, l_max], p in [0, p_max].
inline std::vector<LGSpec> lg_basis(int l_max, int p_max, double waist) {
  std::vector<LGSpec> out;
  for (int p = 0; p <= p_max; ++p)
    for (int l = -l_max; l <= l_max; ++l) out.push_back({l, p, waist});
  return out;
}

/// 18-mode pump basis: l in [-5, 5] at p = 0 plus l in [-3, 3] at p = 1.
inline std::vector<LGSpec> experimental_lg_basis(double waist) {
  std::vector<LGSpec> out;
  for (int l = -5; l <= 5; ++l) out.push_back({l, 0, waist});
  for (int l = -3; l <= 3; ++l) out.push_back({l, 1, waist});
  return out;
}

/// Orders 0..count-1 sharing the width and delay of `base`.
inline std::vector<TemporalSpec> hermite_temporal_basis(const TemporalSpec& base, int count) {
  std::vector<TemporalSpec> out;
  for (int j = 0; j < count; ++j) out.push_back({base.tau0, base.t0, j});
  return out;
}

inline std::vector<TemporalSpec> delay_temporal_basis(double tau0, const std::vector<double>& delays) {
  std::vector<TemporalSpec> out;
  for (double d : delays) out.push_back({tau0, d, 0});
  return out;
}

struct PumpCoefficients {
  std::vector<cplx> spatial;
  std::vector<cplx> temporal;
  friend bool operator==(const PumpCoefficients&, const PumpCoefficients&) = default;
};

inline void normalize(std::vector<cplx>& v) {
  double s = 0.0;
  for (const cplx& c : v) s += std::norm(c);
  if (!(s > 0.0)) throw DegenerateInputError("coefficient vector is zero");
  const double inv = 1.0 / std::sqrt(s);
  for (cplx& c : v) c *= inv;
}

inline PumpCoefficients uniform_coefficients(const PumpBasis& basis) {
  PumpCoefficients c{std::vector<cplx>(basis.spatial.size(), cplx{1.0, 0.0}),
                     std::vector<cplx>(basis.temporal.size(), cplx{1.0, 0.0})};
  if (!c.spatial.empty()) normalize(c.spatial);
  if (!c.temporal.empty()) normalize(c.temporal);
  return c;
}

inline bool is_unit(const std::vector<cplx>& v, double tol = 1e-12) {
  double s = 0.0;
  for (const cplx& c : v) s += std::norm(c);
  return std::abs(s - 1.0) <= tol;
}

/// Pre-generated basis fields so repeated pump builds only superpose.
class PumpBank {
 public:
  PumpBank(const PumpBasis& basis, const Grid3D& grid) : basis_(basis), grid_(grid) {
    if (basis.spatial.empty() || basis.temporal.empty()) {
      throw ConfigError("pump basis needs at least one spatial and one temporal mode");
    }
    for (LGSpec s : basis.spatial) {
      if (s.waist == 0.0) s.waist = basis.waist;
      spatial_.push_back(lg_mode(s, grid));
    }
    for (const auto& t : basis.temporal) temporal_.push_back(temporal_mode(t, grid));
  }

  const PumpBasis& basis() const { return basis_; }

  /// Unit-norm 3D pump: (sum C_pl LG^p_l) x (sum tau_j Phi_j).
  Field build(const PumpCoefficients& c) const {
    if (c.spatial.size() != spatial_.size() || c.temporal.size() != temporal_.size()) {
      throw ConfigError("pump coefficients do not match the basis size");
    }
    if (!is_unit(c.spatial, 1e-9) || !is_unit(c.temporal, 1e-9)) {
      throw ConfigError("pump coefficient vectors must have unit norm");
    }
    std::vector<WeightedField> s, t;
    for (std::size_t i = 0; i < spatial_.size(); ++i) s.push_back({c.spatial[i], spatial_[i]});
    for (std::size_t i = 0; i < temporal_.size(); ++i) t.push_back({c.temporal[i], temporal_[i]});
    return compose(superpose(s), superpose(t)).with_carrier(Carrier::pump);
  }

 private:
  PumpBasis basis_;
  Grid3D grid_;
  std::vector<Field> spatial_;
  std::vector<Field> temporal_;
};

inline Field build_pump(const PumpCoefficients& coeffs, const PumpBasis& basis, const Grid3D& grid) {
  return PumpBank(basis, grid).build(coeffs);
}

/// Spatial LG basis at `waist` times Hermite-Gauss temporal orders of
/// `temporal_base`, one order per temporal coefficient.
inline Field build_pump(const PumpCoefficients& coeffs, const std::vector<LGSpec>& spatial,
                        const Grid3D& grid, double waist, const TemporalSpec& temporal_base) {
  PumpBasis basis{waist, spatial,
                  hermite_temporal_basis(temporal_base, static_cast<int>(coeffs.temporal.size()))};
  return build_pump(coeffs, basis, grid);
}

// ---------------------------------------------------------------------------
// Objective

struct OptProblem {
  std::size_t target = 0;
  std::vector<ModeSpec> signals;
  Grid3D grid;
  CrystalParams crystal;
  SolverParams solver;
  Detector detector;
  PumpBasis basis;
  double pump_peak_amplitude = 1.0;  // V/m, peak |A_p| at the entrance
  double signal_scale = 1.0;         // common factor on unit-norm signals
  std::size_t jobs = 1;

  void validate() const {
    if (signals.size() < 2) throw ConfigError("optimization needs at least two signals");
    if (target >= signals.size()) throw ConfigError("target index out of range");
    for (std::size_t i = 0; i < signals.size(); ++i)
      for (std::size_t j = i + 1; j < signals.size(); ++j)
        if (signals[i].spatial == signals[j].spatial && signals[i].temporal == signals[j].temporal) {
          throw ConfigError("signals " + std::to_string(i) + " and " + std::to_string(j) +
                            " are identical");
        }
    if (!(pump_peak_amplitude > 0.0)) throw ConfigError("pump peak amplitude must be positive");
    if (!(signal_scale > 0.0)) throw ConfigError("signal scale must be positive");
    crystal.validate();
    solver.validate(crystal.length);
  }
};

struct ObjectiveValue {
  double db = 0.0;  // worst-pair selectivity of the target
  SelectivityReport report;
};

/// Error raised while propagating one signal during an objective evaluation.
class SignalEvaluationError : public Error {
 public:
  SignalEvaluationError(std::size_t index, const std::string& what)
      : Error("signal " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Propagates every signal against the pump built from a coefficient set and
/// scores the target with min_j (Nbar_target - Nbar_j).
class ObjectiveEvaluator {
 public:
  explicit ObjectiveEvaluator(const OptProblem& problem)
      : problem_(problem), bank_(problem.basis, problem.grid) {
    for (const auto& spec : problem.signals) {
      signals_.push_back(
          build_mode(normalized(spec), problem.grid).scaled(problem.signal_scale).with_carrier(Carrier::signal));
    }
  }

  const OptProblem& problem() const { return problem_; }
  const PumpBank& bank() const { return bank_; }

  Field pump_field(const PumpCoefficients& c) const {
    const Field unit = bank_.build(c);
    return unit.scaled(problem_.pump_peak_amplitude / unit.max_abs());
  }

  std::vector<double> counts(const PumpCoefficients& c) const {
    const Field pump = pump_field(c);
    std::vector<double> out(signals_.size(), 0.0);
    parallel_for(signals_.size(), problem_.jobs, [&](std::size_t k) {
      try {
        const auto res = propagate(signals_[k], pump, problem_.crystal, problem_.solver);
        out[k] = detected_count(res.sf, problem_.detector, problem_.crystal);
      } catch (const std::exception& e) {
        throw SignalEvaluationError(k, e.what());
      }
    });
    return out;
  }

  ObjectiveValue evaluate(const PumpCoefficients& c) const {
    ObjectiveValue v;
    v.report = selectivity_report(counts(c), problem_.target);
    v.db = v.report.min_eta;
    return v;
  }

 private:
  OptProblem problem_;
  PumpBank bank_;
  std::vector<Field> signals_;
};

inline ObjectiveValue evaluate_objective(const PumpCoefficients& coeffs, const OptProblem& problem) {
  return ObjectiveEvaluator(problem).evaluate(coeffs);
}

// ---------------------------------------------------------------------------
// Optimizers

struct OptParams {
  std::size_t iterations = 500;
  double sigma = 0.1;
  std::size_t patience = 25;
  double sigma_floor = 1e-3;
  std::uint64_t seed = 0;
  bool optimize_temporal = true;
  std::optional<PumpCoefficients> initial;  // uniform over the basis when empty

  void validate() const {
    if (iterations < 1) throw ConfigError("optimizer iterations must be >= 1");
    if (!(sigma > 0.0)) throw ConfigError("optimizer sigma must be positive");
    if (!(sigma_floor > 0.0) || sigma_floor > sigma) {
      throw ConfigError("optimizer sigma_floor must be in (0, sigma]");
    }
    if (patience < 1) throw ConfigError("optimizer patience must be >= 1");
  }
};

struct OptimizationResult {
  PumpBasis basis;
  PumpCoefficients initial;
  PumpCoefficients best;
  double initial_objective = 0.0;
  double best_objective = 0.0;
  std::vector<double> trace;       // objective of the proposal at each iteration
  std::vector<double> best_trace;  // running best after each iteration
  std::vector<double> sigma_trace;
  std::size_t accepted_moves = 0;
  SelectivityReport report;        // for `best`
  std::uint64_t seed = 0;
  std::optional<std::string> error;  // set when an evaluation failed mid-run
};

/// Common contract for pump search strategies.
class PumpOptimizer {
 public:
  virtual ~PumpOptimizer() = default;
  virtual OptimizationResult optimize(const OptProblem& problem) const = 0;
};

/// Greedy random walk: perturb every coefficient with complex Gaussian noise
/// of scale sigma, renormalize, keep the move only if the objective strictly
/// improves. Sigma halves after `patience` non-improving iterations, down to
/// the floor.
class RandomWalkOptimizer : public PumpOptimizer {
 public:
  explicit RandomWalkOptimizer(OptParams params) : params_(std::move(params)) { params_.validate(); }

  OptimizationResult optimize(const OptProblem& problem) const override {
    problem.validate();
    const ObjectiveEvaluator evaluator(problem);

    OptimizationResult r;
    r.basis = problem.basis;
    r.seed = params_.seed;
    r.initial = params_.initial.value_or(uniform_coefficients(problem.basis));
    normalize(r.initial.spatial);
    normalize(r.initial.temporal);
    ObjectiveValue current = evaluator.evaluate(r.initial);
    r.initial_objective = current.db;
    r.best = r.initial;
    r.best_objective = current.db;
    r.report = current.report;

    std::mt19937_64 rng(params_.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double sigma = params_.sigma;
    std::size_t stale = 0;
    const auto perturb = [&](std::vector<cplx>& v) {
      const double s = sigma / std::sqrt(2.0);
      for (cplx& c : v) {
        const double re = normal(rng);
        const double im = normal(rng);
        c += cplx(re * s, im * s);
      }
      normalize(v);
    };

    for (std::size_t it = 0; it < params_.iterations; ++it) {
      PumpCoefficients candidate = r.best;
      perturb(candidate.spatial);
      if (params_.optimize_temporal) perturb(candidate.temporal);
      ObjectiveValue v;
      try {
        v = evaluator.evaluate(candidate);
      } catch (const std::exception& e) {
        r.error = "iteration " + std::to_string(it) + ": " + e.what();
        break;
      }
      r.trace.push_back(v.db);
      r.sigma_trace.push_back(sigma);
      if (v.db > r.best_objective) {
        r.best = std::move(candidate);
        r.best_objective = v.db;
        r.report = std::move(v.report);
        ++r.accepted_moves;
        stale = 0;
      } else if (++stale >= params_.patience) {
        sigma = std::max(0.5 * sigma, params_.sigma_floor);
        stale = 0;
      }
      r.best_trace.push_back(r.best_objective);
    }
    return r;
  }

  const OptParams& params() const { return params_; }

 private:
  OptParams params_;
};

inline OptimizationResult random_walk_optimize(const OptProblem& problem, const OptParams& params) {
  return RandomWalkOptimizer(params).optimize(problem);
}

}  // namespace msqfc
