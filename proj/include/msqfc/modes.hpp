#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "msqfc/errors.hpp"
#include "msqfc/field.hpp"

namespace msqfc {

/// Laguerre-Gaussian mode LG^p_l at its waist plane.
struct LGSpec {
  int l = 0;
  int p = 0;
  double waist = 0.0;
  friend bool operator==(const LGSpec&, const LGSpec&) = default;
};

/// Hermite-Gaussian mode HG_mn in a frame rotated by theta.
///
/// Frame convention: x' = x cos(theta) - y sin(theta),
/// y' = -x sin(theta) - y cos(theta); m orders along y', n along x'. With the
/// exp(-i l phi) azimuthal phase of LGSpec this makes
///   LG^0_{+-1} = (HG_01 +- i HG_10)/sqrt(2)
///   HG_01(theta) = (LG^0_{+1} e^{-i theta} + LG^0_{-1} e^{i theta})/sqrt(2)
/// hold exactly.
struct HGSpec {
  int m = 0;
  int n = 0;
  double waist = 0.0;
  double theta = 0.0;
  friend bool operator==(const HGSpec&, const HGSpec&) = default;
};

/// Temporal Hermite-Gauss function; order 0 is exp(-(t-t0)^2/tau0^2).
struct TemporalSpec {
  double tau0 = 0.0;
  double t0 = 0.0;
  int order = 0;
  friend bool operator==(const TemporalSpec&, const TemporalSpec&) = default;
};

using SpatialSpec = std::variant<LGSpec, HGSpec>;

struct SpatialTerm {
  cplx coeff{1.0, 0.0};
  SpatialSpec mode;
  friend bool operator==(const SpatialTerm&, const SpatialTerm&) = default;
};

struct TemporalTerm {
  cplx coeff{1.0, 0.0};
  TemporalSpec mode;
  friend bool operator==(const TemporalTerm&, const TemporalTerm&) = default;
};

/// Spatio-temporal mode: a spatial superposition times a temporal one.
struct ModeSpec {
  std::string label;
  std::vector<SpatialTerm> spatial;
  std::vector<TemporalTerm> temporal;
  friend bool operator==(const ModeSpec&, const ModeSpec&) = default;
};

enum class Strictness { lenient, strict };

// ---------------------------------------------------------------------------
// Analytic point evaluation

inline void validate(const LGSpec& s) {
  if (s.p < 0) throw ConfigError("LG radial index p must be >= 0");
  if (!(s.waist > 0.0)) throw ConfigError("LG waist must be positive");
}

inline void validate(const HGSpec& s) {
  if (s.m < 0 || s.n < 0) throw ConfigError("HG indices must be >= 0");
  if (!(s.waist > 0.0)) throw ConfigError("HG waist must be positive");
}

inline void validate(const TemporalSpec& s) {
  if (!(s.tau0 > 0.0)) throw ConfigError("temporal width tau0 must be positive");
  if (s.order < 0) throw ConfigError("temporal order must be >= 0");
}

inline double factorial(int n) { return std::tgamma(static_cast<double>(n) + 1.0); }

/// LG^p_l(x, y) with curvature, Gouy phase and kz fixed to the waist plane.
inline cplx lg_value(const LGSpec& s, double x, double y) {
  const int al = std::abs(s.l);
  const double w = s.waist;
  const double r2 = x * x + y * y;
  const double c = std::sqrt(2.0 * factorial(s.p) / (std::numbers::pi * factorial(s.p + al)));
  const double radial = c / w * std::pow(std::sqrt(2.0 * r2) / w, al) *
                        std::assoc_laguerre(static_cast<unsigned>(s.p), static_cast<unsigned>(al),
                                            2.0 * r2 / (w * w)) *
                        std::exp(-r2 / (w * w));
  if (s.l == 0) return {radial, 0.0};
  const double phi = std::atan2(y, x);
  return radial * std::polar(1.0, -static_cast<double>(s.l) * phi);
}

inline double hg_value(const HGSpec& s, double x, double y) {
  const double w = s.waist;
  const double ct = std::cos(s.theta);
  const double st = std::sin(s.theta);
  const double xr = x * ct - y * st;
  const double yr = -x * st - y * ct;
  const double norm = std::sqrt(2.0 / std::numbers::pi) / w /
                      std::sqrt(std::ldexp(1.0, s.m + s.n) * factorial(s.m) * factorial(s.n));
  const double a = std::sqrt(2.0) / w;
  return norm * std::hermite(static_cast<unsigned>(s.m), a * yr) *
         std::hermite(static_cast<unsigned>(s.n), a * xr) * std::exp(-(x * x + y * y) / (w * w));
}

inline double temporal_value(const TemporalSpec& s, double t) {
  const double u = t - s.t0;
  const double norm = 1.0 / std::sqrt(std::ldexp(1.0, s.order) * factorial(s.order) *
                                      std::sqrt(std::numbers::pi) * s.tau0 / std::sqrt(2.0));
  return norm * std::hermite(static_cast<unsigned>(s.order), std::sqrt(2.0) * u / s.tau0) *
         std::exp(-u * u / (s.tau0 * s.tau0));
}

// ---------------------------------------------------------------------------
// Window diagnostics

/// Largest edge-row/column magnitude relative to the peak, for 2D fields.
inline double edge_fraction(const Field& f) {
  if (f.rank() != Rank::spatial2d) throw ShapeError("edge_fraction needs a spatial-2D field");
  const Grid3D& g = f.grid();
  double edge = 0.0;
  for (std::size_t i = 0; i < g.nx(); ++i) {
    edge = std::max({edge, std::abs(f.at(i, 0)), std::abs(f.at(i, g.ny() - 1))});
  }
  for (std::size_t j = 0; j < g.ny(); ++j) {
    edge = std::max({edge, std::abs(f.at(0, j)), std::abs(f.at(g.nx() - 1, j))});
  }
  const double peak = f.max_abs();
  return peak > 0.0 ? edge / peak : 0.0;
}

inline constexpr double kEdgeTolerance = 1e-3;

/// Warning text when the spatial window clips the mode; empty otherwise.
inline std::optional<std::string> window_warning(const Field& f) {
  const double frac = edge_fraction(f);
  if (frac > kEdgeTolerance) {
    return "spatial window clips the mode: edge amplitude is " + std::to_string(frac) +
           " of peak";
  }
  return std::nullopt;
}

namespace detail {

inline Field finish_spatial(const Grid3D& g, Samples data, double waist, Strictness strictness) {
  Field f(g, Rank::spatial2d, std::move(data));
  if (strictness == Strictness::strict) {
    if (std::min(g.lx(), g.ly()) < 4.0 * waist) {
      throw AccuracyError("spatial window is smaller than 4 waists");
    }
    if (auto w = window_warning(f)) throw AccuracyError(*w);
  }
  return f.normalized();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Grid generators

inline Field lg_mode(const LGSpec& s, const Grid3D& g, Strictness strictness = Strictness::lenient) {
  validate(s);
  Samples data(g.spatial_size());
  for (std::size_t ix = 0; ix < g.nx(); ++ix)
    for (std::size_t iy = 0; iy < g.ny(); ++iy) data[ix * g.ny() + iy] = lg_value(s, g.x(ix), g.y(iy));
  return detail::finish_spatial(g, std::move(data), s.waist, strictness);
}

inline Field hg_mode(const HGSpec& s, const Grid3D& g, Strictness strictness = Strictness::lenient) {
  validate(s);
  Samples data(g.spatial_size());
  for (std::size_t ix = 0; ix < g.nx(); ++ix)
    for (std::size_t iy = 0; iy < g.ny(); ++iy) data[ix * g.ny() + iy] = hg_value(s, g.x(ix), g.y(iy));
  return detail::finish_spatial(g, std::move(data), s.waist, strictness);
}

inline Field spatial_mode(const SpatialSpec& s, const Grid3D& g,
                          Strictness strictness = Strictness::lenient) {
  return std::visit(
      [&](const auto& spec) -> Field {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, LGSpec>) return lg_mode(spec, g, strictness);
        else return hg_mode(spec, g, strictness);
      },
      s);
}

inline Field temporal_mode(const TemporalSpec& s, const Grid3D& g) {
  validate(s);
  const double reach = 4.0 * s.tau0;
  if (s.t0 - reach < g.t_min() || s.t0 + reach > g.t_max()) {
    throw ConfigError("temporal mode (t0 +- 4 tau0) does not fit in the temporal window");
  }
  Samples data(g.nt());
  for (std::size_t it = 0; it < g.nt(); ++it) data[it] = temporal_value(s, g.t(it));
  return Field(g, Rank::temporal1d, std::move(data)).normalized();
}

struct WeightedField {
  cplx coeff;
  Field field;
};

/// Coefficient-weighted sum renormalized to unit norm.
inline Field superpose(const std::vector<WeightedField>& terms) {
  if (terms.empty()) throw DegenerateInputError("superpose needs at least one term");
  bool any_nonzero = false;
  for (const auto& t : terms) {
    require_compatible(terms.front().field, t.field, "superpose");
    any_nonzero = any_nonzero || std::abs(t.coeff) > 0.0;
  }
  if (!any_nonzero) throw DegenerateInputError("superpose: all coefficients are zero");
  const Field& first = terms.front().field;
  Samples acc(first.size());
  for (const auto& t : terms) {
    const auto s = t.field.samples();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += t.coeff * s[i];
  }
  Field out(first.grid(), first.rank(), std::move(acc), first.carrier(), first.domain());
  if (!(out.norm() > 0.0)) throw DegenerateInputError("superpose: terms cancel to zero");
  return out.normalized();
}

/// Outer product E_r(x, y) E_t(t) without normalization.
inline Field outer_product(const Field& spatial, const Field& temporal) {
  if (spatial.rank() != Rank::spatial2d || temporal.rank() != Rank::temporal1d) {
    throw ShapeError("compose needs a spatial-2D and a temporal-1D field");
  }
  if (!(spatial.grid() == temporal.grid())) throw ShapeError("compose: grids differ");
  const Grid3D& g = spatial.grid();
  Samples out(g.size());
  const std::size_t nt = g.nt();
  for (std::size_t s = 0; s < g.spatial_size(); ++s) {
    const cplx a = spatial[s];
    for (std::size_t it = 0; it < nt; ++it) out[s * nt + it] = a * temporal[it];
  }
  return Field(g, Rank::spatiotemporal3d, std::move(out));
}

/// Separable spatio-temporal field, unit-normalized in 3D.
inline Field compose(const Field& spatial, const Field& temporal) {
  return outer_product(spatial, temporal).normalized();
}

/// Scales every coefficient so the vector has unit L2 norm.
template <class Term>
void normalize_terms(std::vector<Term>& terms) {
  double s = 0.0;
  for (const auto& t : terms) s += std::norm(t.coeff);
  if (!(s > 0.0)) throw DegenerateInputError("mode coefficients are all zero");
  const double inv = 1.0 / std::sqrt(s);
  for (auto& t : terms) t.coeff *= inv;
}

inline ModeSpec normalized(ModeSpec spec) {
  normalize_terms(spec.spatial);
  normalize_terms(spec.temporal);
  return spec;
}

inline Field build_spatial(const std::vector<SpatialTerm>& terms, const Grid3D& g,
                           Strictness strictness = Strictness::lenient) {
  std::vector<WeightedField> fields;
  fields.reserve(terms.size());
  for (const auto& t : terms) fields.push_back({t.coeff, spatial_mode(t.mode, g, strictness)});
  return superpose(fields);
}

inline Field build_temporal(const std::vector<TemporalTerm>& terms, const Grid3D& g) {
  std::vector<WeightedField> fields;
  fields.reserve(terms.size());
  for (const auto& t : terms) fields.push_back({t.coeff, temporal_mode(t.mode, g)});
  return superpose(fields);
}

/// Unit-norm 3D field of a ModeSpec.
inline Field build_mode(const ModeSpec& spec, const Grid3D& g,
                        Strictness strictness = Strictness::lenient) {
  if (spec.spatial.empty() || spec.temporal.empty()) {
    throw ConfigError("mode '" + spec.label + "' needs spatial and temporal terms");
  }
  return compose(build_spatial(spec.spatial, g, strictness), build_temporal(spec.temporal, g));
}

}  // namespace msqfc
