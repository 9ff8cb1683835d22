#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "msqfc/errors.hpp"
#include "msqfc/grid.hpp"

namespace msqfc {

using cplx = std::complex<double>;

/// Allocator returning 64-byte aligned storage so every sample buffer shares
/// the alignment the cached FFT plans were made with.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(Align)); }

  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

using Samples = std::vector<cplx, AlignedAllocator<cplx>>;

enum class Rank { spatial2d, temporal1d, spatiotemporal3d };
enum class Carrier { none, signal, pump, sf };
enum class Domain { direct, spectral };

inline const char* to_string(Rank r) {
  switch (r) {
    case Rank::spatial2d: return "spatial-2D";
    case Rank::temporal1d: return "temporal-1D";
    case Rank::spatiotemporal3d: return "spatiotemporal-3D";
  }
  return "?";
}

inline std::size_t sample_count(const Grid3D& g, Rank r) {
  switch (r) {
    case Rank::spatial2d: return g.spatial_size();
    case Rank::temporal1d: return g.nt();
    case Rank::spatiotemporal3d: return g.size();
  }
  return 0;
}

/// Riemann cell volume used by inner products. Spectral-domain fields keep
/// the direct-space weight so that unitary transforms preserve norms.
inline double cell_volume(const Grid3D& g, Rank r) {
  switch (r) {
    case Rank::spatial2d: return g.dx() * g.dy();
    case Rank::temporal1d: return g.dt();
    case Rank::spatiotemporal3d: return g.dx() * g.dy() * g.dt();
  }
  return 0.0;
}

/// Complex envelope sampled on a grid. Layout is row-major (x, y, t) with t
/// fastest; 2D fields are (x, y), 1D fields are (t). Immutable once built.
class Field {
 public:
  Field(Grid3D grid, Rank rank, Samples data, Carrier carrier = Carrier::none,
        Domain domain = Domain::direct)
      : grid_(grid), rank_(rank), carrier_(carrier), domain_(domain), data_(std::move(data)) {
    if (data_.size() != sample_count(grid_, rank_)) {
      throw ShapeError("field sample count " + std::to_string(data_.size()) +
                       " does not match grid for rank " + to_string(rank_));
    }
    for (const cplx& v : data_) {
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
        throw NumericBlowupError("field contains non-finite samples", 0.0);
      }
    }
  }

  static Field zeros(const Grid3D& grid, Rank rank, Carrier carrier = Carrier::none) {
    return Field(grid, rank, Samples(sample_count(grid, rank)), carrier);
  }

  const Grid3D& grid() const { return grid_; }
  Rank rank() const { return rank_; }
  Carrier carrier() const { return carrier_; }
  Domain domain() const { return domain_; }
  std::span<const cplx> samples() const { return data_; }
  std::size_t size() const { return data_.size(); }
  double cell_volume() const { return msqfc::cell_volume(grid_, rank_); }

  const cplx& operator[](std::size_t i) const { return data_[i]; }
  const cplx& at(std::size_t ix, std::size_t iy) const { return data_[ix * grid_.ny() + iy]; }
  const cplx& at(std::size_t ix, std::size_t iy, std::size_t it) const {
    return data_[(ix * grid_.ny() + iy) * grid_.nt() + it];
  }

  /// Squared L2 norm, sum |f|^2 dV.
  double norm2() const {
    double s = 0.0;
    for (const cplx& v : data_) s += std::norm(v);
    return s * cell_volume();
  }
  double norm() const { return std::sqrt(norm2()); }
  double max_abs() const {
    double m = 0.0;
    for (const cplx& v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  Field scaled(cplx factor) const {
    Samples out(data_);
    for (cplx& v : out) v *= factor;
    return Field(grid_, rank_, std::move(out), carrier_, domain_);
  }
  Field normalized() const {
    const double n = norm();
    if (!(n > 0.0)) throw DegenerateInputError("cannot normalize a zero field");
    return scaled(1.0 / n);
  }
  Field with_carrier(Carrier c) const { return Field(grid_, rank_, Samples(data_), c, domain_); }

  /// Moves the buffer out; used by code that builds a new field from an old one.
  Samples release() && { return std::move(data_); }

 private:
  Grid3D grid_;
  Rank rank_;
  Carrier carrier_;
  Domain domain_;
  Samples data_;
};

inline void require_compatible(const Field& f, const Field& g, const char* op) {
  if (!(f.grid() == g.grid()) || f.rank() != g.rank() || f.domain() != g.domain()) {
    throw ShapeError(std::string(op) + ": fields do not share grid, rank and domain");
  }
}

/// Riemann approximation of the integral of conj(f) g.
inline cplx inner_product(const Field& f, const Field& g) {
  require_compatible(f, g, "inner_product");
  cplx s{0.0, 0.0};
  const auto a = f.samples();
  const auto b = g.samples();
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s * f.cell_volume();
}

/// Spatial (x, y) slice of a 3D field at temporal index it.
inline Field spatial_slice(const Field& f, std::size_t it) {
  if (f.rank() != Rank::spatiotemporal3d) throw ShapeError("spatial_slice needs a 3D field");
  const Grid3D& g = f.grid();
  Samples out(g.spatial_size());
  for (std::size_t ix = 0; ix < g.nx(); ++ix)
    for (std::size_t iy = 0; iy < g.ny(); ++iy) out[ix * g.ny() + iy] = f.at(ix, iy, it);
  return Field(g, Rank::spatial2d, std::move(out), f.carrier(), f.domain());
}

/// Temporal profile of a 3D field at spatial index (ix, iy).
inline Field temporal_profile(const Field& f, std::size_t ix, std::size_t iy) {
  if (f.rank() != Rank::spatiotemporal3d) throw ShapeError("temporal_profile needs a 3D field");
  const Grid3D& g = f.grid();
  Samples out(g.nt());
  for (std::size_t it = 0; it < g.nt(); ++it) out[it] = f.at(ix, iy, it);
  return Field(g, Rank::temporal1d, std::move(out), f.carrier(), f.domain());
}

/// Index triple of the sample with the largest magnitude.
struct PeakIndex {
  std::size_t ix = 0, iy = 0, it = 0;
};

inline PeakIndex peak_index(const Field& f) {
  const Grid3D& g = f.grid();
  PeakIndex best;
  double m = -1.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double a = std::abs(f[i]);
    if (a > m) {
      m = a;
      switch (f.rank()) {
        case Rank::spatial2d: best = {i / g.ny(), i % g.ny(), 0}; break;
        case Rank::temporal1d: best = {0, 0, i}; break;
        case Rank::spatiotemporal3d:
          best = {i / (g.ny() * g.nt()), (i / g.nt()) % g.ny(), i % g.nt()};
          break;
      }
    }
  }
  return best;
}

}  // namespace msqfc
