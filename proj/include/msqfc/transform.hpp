#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>

#include "msqfc/errors.hpp"
#include "msqfc/field.hpp"

namespace msqfc {

enum class Direction { forward, inverse };

namespace fft {

/// Cached FFTW plans keyed by shape and direction. Plans are made with
/// FFTW_ESTIMATE so the chosen algorithm, and therefore every bit of the
/// output, is the same on each run. Planning is serialized; executing a plan
/// on new arrays is thread safe.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const std::array<int, 3>& dims, int rank, Direction dir, bool in_place = true) {
    const Key key{dims, rank, dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD, in_place};
    std::lock_guard lock(mutex_);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::size_t total = 1;
    for (int i = 0; i < rank; ++i) total *= static_cast<std::size_t>(dims[static_cast<std::size_t>(i)]);
    auto* in = fftw_alloc_complex(total);
    auto* out = in_place ? in : fftw_alloc_complex(total);
    fftw_plan plan = fftw_plan_dft(rank, dims.data(), in, out, key.sign, FFTW_ESTIMATE);
    if (!in_place) fftw_free(out);
    fftw_free(in);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  struct Key {
    std::array<int, 3> dims;
    int rank;
    int sign;
    bool in_place;
    auto operator<=>(const Key&) const = default;
  };
  std::mutex mutex_;
  std::map<Key, fftw_plan> plans_;
};

/// In-place unitary DFT of a row-major buffer. `data` must come from an
/// AlignedAllocator buffer.
inline void execute(std::span<cplx> data, std::span<const std::size_t> dims, Direction dir) {
  std::array<int, 3> d{1, 1, 1};
  std::size_t total = 1;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    d[i] = static_cast<int>(dims[i]);
    total *= dims[i];
  }
  if (total != data.size()) throw ShapeError("fft buffer size does not match its shape");
  fftw_plan plan = PlanCache::instance().get(d, static_cast<int>(dims.size()), dir);
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, p, p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(total));
  for (cplx& v : data) v *= scale;
}

/// Out-of-place, unnormalized 3D DFT; the caller owns the 1/sqrt(N)
/// factors. Both buffers must come from AlignedAllocator storage.
inline void execute_raw(const cplx* in, cplx* out, const std::array<std::size_t, 3>& dims,
                        Direction dir) {
  const std::array<int, 3> d{static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                             static_cast<int>(dims[2])};
  fftw_plan plan = PlanCache::instance().get(d, 3, dir, false);
  // c2c out-of-place transforms leave the input untouched.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

}  // namespace fft

/// Unitary DFT over the spatial axes (2D fields) or all three axes (3D).
inline Field transform(const Field& f, Direction dir) {
  if (f.rank() == Rank::temporal1d) {
    throw ShapeError("transform needs a spatial-2D or spatiotemporal-3D field");
  }
  const Domain expected = dir == Direction::forward ? Domain::direct : Domain::spectral;
  if (f.domain() != expected) {
    throw ShapeError(dir == Direction::forward ? "forward transform of a spectral field"
                                               : "inverse transform of a direct-space field");
  }
  const Grid3D& g = f.grid();
  Samples data(f.samples().begin(), f.samples().end());
  if (f.rank() == Rank::spatial2d) {
    const std::array<std::size_t, 2> dims{g.nx(), g.ny()};
    fft::execute(data, dims, dir);
  } else {
    const std::array<std::size_t, 3> dims{g.nx(), g.ny(), g.nt()};
    fft::execute(data, dims, dir);
  }
  return Field(g, f.rank(), std::move(data), f.carrier(),
               dir == Direction::forward ? Domain::spectral : Domain::direct);
}

}  // namespace msqfc
