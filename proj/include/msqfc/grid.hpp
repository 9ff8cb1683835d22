#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "msqfc/errors.hpp"

namespace msqfc {

/// Uniform (x, y, t) computational window. Sample positions are centred on
/// the origin: x_i = (i - nx/2) dx, so the origin is a grid node. Spectral
/// axes follow FFT ordering (0, 1, ..., n/2-1, -n/2, ..., -1) times the
/// spectral spacing 2*pi/extent.
class Grid3D {
 public:
  Grid3D() = default;

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t nt() const { return nt_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double lt() const { return lt_; }

  double dx() const { return lx_ / static_cast<double>(nx_); }
  double dy() const { return ly_ / static_cast<double>(ny_); }
  double dt() const { return lt_ / static_cast<double>(nt_); }
  double dkx() const { return 2.0 * std::numbers::pi / lx_; }
  double dky() const { return 2.0 * std::numbers::pi / ly_; }
  double domega() const { return 2.0 * std::numbers::pi / lt_; }

  double x(std::size_t i) const { return centred(i, nx_) * dx(); }
  double y(std::size_t i) const { return centred(i, ny_) * dy(); }
  double t(std::size_t i) const { return centred(i, nt_) * dt(); }

  double kx(std::size_t i) const { return fft_index(i, nx_) * dkx(); }
  double ky(std::size_t i) const { return fft_index(i, ny_) * dky(); }
  double omega(std::size_t i) const { return fft_index(i, nt_) * domega(); }

  double x_min() const { return x(0); }
  double x_max() const { return x(nx_ - 1); }
  double y_min() const { return y(0); }
  double y_max() const { return y(ny_ - 1); }
  double t_min() const { return t(0); }
  double t_max() const { return t(nt_ - 1); }

  std::size_t spatial_size() const { return nx_ * ny_; }
  std::size_t size() const { return nx_ * ny_ * nt_; }

  friend bool operator==(const Grid3D&, const Grid3D&) = default;

  friend Grid3D make_grid(std::size_t nx, std::size_t ny, std::size_t nt, double lx, double ly,
                          double lt);

 private:
  static double centred(std::size_t i, std::size_t n) {
    return static_cast<double>(i) - static_cast<double>(n / 2);
  }
  static double fft_index(std::size_t i, std::size_t n) {
    return i < n / 2 ? static_cast<double>(i) : static_cast<double>(i) - static_cast<double>(n);
  }

  std::size_t nx_ = 0, ny_ = 0, nt_ = 0;
  double lx_ = 0.0, ly_ = 0.0, lt_ = 0.0;
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline Grid3D make_grid(std::size_t nx, std::size_t ny, std::size_t nt, double lx, double ly,
                        double lt) {
  const auto check_count = [](std::size_t n, const char* name) {
    if (n < 8 || !is_power_of_two(n)) {
      throw ConfigError(std::string("grid count ") + name + " = " + std::to_string(n) +
                        " must be a power of two >= 8");
    }
  };
  const auto check_extent = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("grid extent ") + name + " must be positive and finite");
    }
  };
  check_count(nx, "nx");
  check_count(ny, "ny");
  check_count(nt, "nt");
  check_extent(lx, "lx");
  check_extent(ly, "ly");
  check_extent(lt, "lt");

  Grid3D g;
  g.nx_ = nx;
  g.ny_ = ny;
  g.nt_ = nt;
  g.lx_ = lx;
  g.ly_ = ly;
  g.lt_ = lt;
  return g;
}

}  // namespace msqfc

namespace msqfc {

inline constexpr double kDefaultSpatialWindowWaists = 11.0;
inline constexpr double kDefaultTemporalWindowWidths = 8.0;

/// 64^3 grid whose spatial window spans 11 of the largest waist and whose
/// temporal window spans 8 pulse widths plus twice the largest delay.
inline Grid3D default_grid(double largest_waist, double largest_tau0, double largest_delay = 0.0) {
  const double l = kDefaultSpatialWindowWaists * largest_waist;
  return make_grid(64, 64, 64, l, l,
                   kDefaultTemporalWindowWidths * largest_tau0 + 2.0 * std::abs(largest_delay));
}

}  // namespace msqfc
