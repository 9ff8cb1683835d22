#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "msqfc/crystal.hpp"
#include "msqfc/errors.hpp"
#include "msqfc/field.hpp"
#include "msqfc/modes.hpp"
#include "msqfc/parallel.hpp"
#include "msqfc/propagation.hpp"

namespace msqfc {

/// Reported value for a zero count, in dB.
inline constexpr double kZeroCountFloorDb = -99.0;

// ---------------------------------------------------------------------------
// Detection

/// How SF photons are counted at the exit face. `single_mode` projects each
/// time slice onto a Gaussian fibre mode and integrates |overlap|^2 over
/// time, as a single-mode fibre followed by a slow detector does. `total`
/// counts the whole SF photon flux.
struct Detector {
  enum class Kind { single_mode, total };
  Kind kind = Kind::single_mode;
  double waist = 0.0;  // m, fibre mode waist for single_mode
};

inline double detected_count(const Field& sf, const Detector& det, const CrystalParams& crystal) {
  if (sf.rank() != Rank::spatiotemporal3d || sf.domain() != Domain::direct) {
    throw ShapeError("detected_count needs a direct-space 3D SF field");
  }
  if (det.kind == Detector::Kind::total) {
    return photon_flux(sf.norm2(), crystal.n_sf, crystal.omega_sf());
  }
  if (!(det.waist > 0.0)) throw ConfigError("single-mode detector waist must be positive");
  const Grid3D& g = sf.grid();
  const Field mode = lg_mode(LGSpec{0, 0, det.waist}, g);
  const std::size_t nt = g.nt();
  std::vector<cplx> overlap(nt);
  for (std::size_t s = 0; s < g.spatial_size(); ++s) {
    const cplx m = std::conj(mode[s]);
    if (m == cplx{}) continue;
    const cplx* row = sf.samples().data() + s * nt;
    for (std::size_t it = 0; it < nt; ++it) overlap[it] += m * row[it];
  }
  double acc = 0.0;
  const double da = g.dx() * g.dy();
  for (const cplx& o : overlap) acc += std::norm(o * da);
  return photon_flux(acc * g.dt(), crystal.n_sf, crystal.omega_sf());
}

// ---------------------------------------------------------------------------
// Normalized counts and selectivity

struct NormalizedCounts {
  std::vector<double> db;
  std::vector<bool> zero;  // entry came from a zero count and holds the floor
};

/// 10 log10(N_i / sum N).
inline NormalizedCounts normalized_counts(const std::vector<double>& counts) {
  if (counts.empty()) throw DegenerateInputError("normalized_counts: empty count vector");
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw ConfigError("normalized_counts: counts must be finite and nonnegative");
    }
    total += c;
  }
  if (!(total > 0.0)) throw DegenerateInputError("normalized_counts: all counts are zero");
  NormalizedCounts out;
  out.db.reserve(counts.size());
  out.zero.reserve(counts.size());
  for (double c : counts) {
    const bool is_zero = c == 0.0;
    out.zero.push_back(is_zero);
    out.db.push_back(is_zero ? kZeroCountFloorDb : 10.0 * std::log10(c / total));
  }
  return out;
}

inline double selectivity(const std::vector<double>& nbar_db, std::size_t i, std::size_t j) {
  if (i >= nbar_db.size() || j >= nbar_db.size()) {
    throw ConfigError("selectivity: index out of range");
  }
  if (i == j) throw DegenerateInputError("selectivity: i == j is trivially 0 dB");
  return nbar_db[i] - nbar_db[j];
}

struct SelectivityReport {
  std::vector<double> counts;
  std::vector<double> nbar_db;
  std::vector<bool> zero;
  std::size_t target = 0;
  std::vector<std::vector<double>> eta;  // eta[i][j] = nbar_i - nbar_j
  double min_eta = 0.0;                  // min over j != target of eta[target][j]
  std::uint64_t seed = 0;
  std::string config_digest;
};

inline SelectivityReport selectivity_report(const std::vector<double>& counts, std::size_t target) {
  if (counts.size() < 2) throw ConfigError("selectivity report needs at least two signals");
  if (target >= counts.size()) throw ConfigError("selectivity report: target out of range");
  const NormalizedCounts nc = normalized_counts(counts);
  SelectivityReport r;
  r.counts = counts;
  r.nbar_db = nc.db;
  r.zero = nc.zero;
  r.target = target;
  const std::size_t n = counts.size();
  r.eta.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) r.eta[i][j] = selectivity(r.nbar_db, i, j);
  r.min_eta = HUGE_VAL;
  for (std::size_t j = 0; j < n; ++j)
    if (j != target) r.min_eta = std::min(r.min_eta, r.eta[target][j]);
  return r;
}

/// V = (C_max - C_min) / (C_max + C_min) over sampled (angle, count) pairs.
inline double visibility(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 2) throw ConfigError("visibility needs at least two samples");
  double lo = HUGE_VAL, hi = -HUGE_VAL;
  for (const auto& [angle, count] : samples) {
    if (!(count >= 0.0) || !std::isfinite(count)) {
      throw ConfigError("visibility: counts must be finite and nonnegative");
    }
    lo = std::min(lo, count);
    hi = std::max(hi, count);
  }
  if (!(hi > 0.0)) throw DegenerateInputError("visibility: all counts are zero");
  return (hi - lo) / (hi + lo);
}

/// Optional shot-noise model: draws Poisson counts with mean
/// counts[i] * photons_per_unit. Off unless a caller asks for it.
inline std::vector<double> poisson_sample(const std::vector<double>& counts,
                                          double photons_per_unit, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  out.reserve(counts.size());
  for (double c : counts) {
    const double mean = c * photons_per_unit;
    if (!(mean > 0.0)) {
      out.push_back(0.0);
      continue;
    }
    std::poisson_distribution<std::uint64_t> dist(mean);
    out.push_back(static_cast<double>(dist(rng)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tomography

struct LabeledField {
  std::string label;
  Field field;
};

/// Rows are pumps, columns are signals; each row normalized on its own.
struct TomographyMatrix {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::vector<std::vector<double>> counts;
  std::vector<std::vector<double>> db;
  std::vector<std::vector<bool>> zero;
};

/// Error from one tomography cell, naming the (row, column) pair.
class TomographyCellError : public Error {
 public:
  TomographyCellError(std::size_t row, std::size_t col, const std::string& what)
      : Error("tomography cell (row " + std::to_string(row) + ", column " + std::to_string(col) +
              "): " + what),
        row_(row),
        col_(col) {}
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_, col_;
};

inline TomographyMatrix tomography_matrix(const std::vector<LabeledField>& signals,
                                          const std::vector<LabeledField>& pumps,
                                          const CrystalParams& crystal, const SolverParams& solver,
                                          const Detector& detector, std::size_t jobs = 1) {
  if (signals.empty() || pumps.empty()) {
    throw ConfigError("tomography needs at least one signal and one pump");
  }
  const std::size_t rows = pumps.size(), cols = signals.size();
  TomographyMatrix m;
  for (const auto& p : pumps) m.row_labels.push_back(p.label);
  for (const auto& s : signals) m.col_labels.push_back(s.label);
  m.counts.assign(rows, std::vector<double>(cols, 0.0));
  parallel_for(rows * cols, jobs, [&](std::size_t cell) {
    const std::size_t r = cell / cols, c = cell % cols;
    try {
      const auto res = propagate(signals[c].field, pumps[r].field, crystal, solver);
      m.counts[r][c] = detected_count(res.sf, detector, crystal);
    } catch (const std::exception& e) {
      throw TomographyCellError(r, c, e.what());
    }
  });
  for (std::size_t r = 0; r < rows; ++r) {
    try {
      const NormalizedCounts nc = normalized_counts(m.counts[r]);
      m.db.push_back(nc.db);
      m.zero.push_back(nc.zero);
    } catch (const DegenerateInputError&) {
      throw DegenerateInputError("tomography row " + std::to_string(r) + " has no SF counts");
    }
  }
  return m;
}

}  // namespace msqfc
