#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include "msqfc/field.hpp"
#include "msqfc/grid.hpp"
#include "msqfc/io.hpp"
#include "msqfc/transform.hpp"

using namespace msqfc;

namespace {

Field random_field(const Grid3D& g, Rank r, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Samples s(sample_count(g, r));
  for (auto& v : s) v = {d(rng), d(rng)};
  return Field(g, r, std::move(s));
}

// Direct O(N^2) DFT along one axis of a row-major array, unnormalized.
void naive_dft_axis(std::vector<cplx>& a, const std::array<std::size_t, 3>& dims, int axis, int sign) {
  const std::size_t n = dims[static_cast<std::size_t>(axis)];
  std::size_t stride = 1;
  for (int k = axis + 1; k < 3; ++k) stride *= dims[static_cast<std::size_t>(k)];
  std::vector<cplx> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t idx = (i / stride) % n;
    const std::size_t base = i - idx * stride;
    cplx acc{};
    for (std::size_t j = 0; j < n; ++j) {
      const double ph = sign * 2.0 * std::numbers::pi * static_cast<double>(idx * j) / static_cast<double>(n);
      acc += a[base + j * stride] * std::polar(1.0, ph);
    }
    out[i] = acc;
  }
  a = std::move(out);
}

}  // namespace

TEST(Grid, RejectsBadCountsAndExtents) {
  EXPECT_THROW(make_grid(48, 64, 64, 1.0, 1.0, 1.0), ConfigError);
  EXPECT_THROW(make_grid(4, 64, 64, 1.0, 1.0, 1.0), ConfigError);
  EXPECT_THROW(make_grid(64, 64, 64, 0.0, 1.0, 1.0), ConfigError);
  EXPECT_THROW(make_grid(64, 64, 64, 1.0, -1.0, 1.0), ConfigError);
  EXPECT_THROW(make_grid(64, 64, 64, 1.0, 1.0, std::nan("")), ConfigError);
  EXPECT_NO_THROW(make_grid(8, 8, 8, 1.0, 1.0, 1.0));
}

TEST(Grid, SpacingAndFrequencyConventions) {
  const Grid3D g = make_grid(64, 32, 16, 6.4e-4, 3.2e-4, 4e-12);
  EXPECT_DOUBLE_EQ(g.dx(), 1e-5);
  EXPECT_DOUBLE_EQ(g.dt(), 0.25e-12);
  EXPECT_DOUBLE_EQ(g.dkx(), 2.0 * std::numbers::pi / 6.4e-4);
  EXPECT_EQ(g.x(32), 0.0);
  EXPECT_DOUBLE_EQ(g.x(0), -32 * g.dx());
  EXPECT_EQ(g.kx(0), 0.0);
  EXPECT_DOUBLE_EQ(g.kx(1), g.dkx());
  EXPECT_DOUBLE_EQ(g.kx(63), -g.dkx());
  EXPECT_DOUBLE_EQ(g.omega(8), -8 * g.domega());
  EXPECT_EQ(g.size(), 64u * 32u * 16u);
}

TEST(Grid, DefaultGridWindows) {
  const Grid3D g = default_grid(45e-6, 0.3e-12, 0.3e-12);
  EXPECT_EQ(g.nx(), 64u);
  EXPECT_EQ(g.nt(), 64u);
  EXPECT_DOUBLE_EQ(g.lx(), 11 * 45e-6);
  EXPECT_DOUBLE_EQ(g.lt(), 8 * 0.3e-12 + 0.6e-12);
}

TEST(Field, ConstructionChecks) {
  const Grid3D g = make_grid(8, 8, 8, 1.0, 1.0, 1.0);
  EXPECT_THROW(Field(g, Rank::spatial2d, Samples(10)), ShapeError);
  Samples bad(64);
  bad[3] = {std::nan(""), 0.0};
  EXPECT_THROW(Field(g, Rank::spatial2d, std::move(bad)), NumericBlowupError);
  EXPECT_THROW(Field::zeros(g, Rank::spatial2d).normalized(), DegenerateInputError);
}

TEST(Field, UnitNormAfterNormalize) {
  const Grid3D g = make_grid(16, 16, 8, 1e-3, 1e-3, 1e-12);
  const Field f = random_field(g, Rank::spatiotemporal3d, 1).normalized();
  EXPECT_NEAR(f.norm(), 1.0, 1e-12);
  EXPECT_NEAR(inner_product(f, f).real(), 1.0, 1e-12);
}

TEST(Field, InnerProductIsSesquilinear) {
  const Grid3D g = make_grid(16, 16, 8, 2.0, 3.0, 5.0);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 20; ++trial) {
    const Field f = random_field(g, Rank::spatial2d, rng());
    const Field h = random_field(g, Rank::spatial2d, rng());
    const Field k = random_field(g, Rank::spatial2d, rng());
    const cplx a{d(rng), d(rng)}, b{d(rng), d(rng)};
    Samples mix(f.size());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * h[i] + b * k[i];
    const Field m(g, Rank::spatial2d, std::move(mix));
    const cplx lhs = inner_product(f, m);
    const cplx rhs = a * inner_product(f, h) + b * inner_product(f, k);
    EXPECT_LT(std::abs(lhs - rhs), 1e-12 * (1.0 + std::abs(lhs)));
    // conjugate-linear in the first argument
    const cplx lhs2 = inner_product(m, f);
    const cplx rhs2 = std::conj(a) * inner_product(h, f) + std::conj(b) * inner_product(k, f);
    EXPECT_LT(std::abs(lhs2 - rhs2), 1e-12 * (1.0 + std::abs(lhs2)));
    EXPECT_LT(std::abs(inner_product(f, h) - std::conj(inner_product(h, f))), 1e-12);
  }
}

TEST(Field, InnerProductRequiresSameGridAndRank) {
  const Field a = Field::zeros(make_grid(8, 8, 8, 1, 1, 1), Rank::spatial2d);
  const Field b = Field::zeros(make_grid(16, 8, 8, 1, 1, 1), Rank::spatial2d);
  const Field c = Field::zeros(make_grid(8, 8, 8, 1, 1, 1), Rank::temporal1d);
  EXPECT_THROW(inner_product(a, b), ShapeError);
  EXPECT_THROW(inner_product(a, c), ShapeError);
}

TEST(Field, InnerProductOfGaussiansMatchesAnalytic) {
  // <g1|g2> for exp(-r^2/w^2) profiles = pi w1^2 w2^2 / (w1^2 + w2^2)
  const Grid3D g = make_grid(128, 128, 8, 1e-3, 1e-3, 1.0);
  const double w1 = 60e-6, w2 = 90e-6;
  Samples a(g.spatial_size()), b(g.spatial_size());
  for (std::size_t i = 0; i < g.nx(); ++i)
    for (std::size_t j = 0; j < g.ny(); ++j) {
      const double r2 = g.x(i) * g.x(i) + g.y(j) * g.y(j);
      a[i * g.ny() + j] = std::exp(-r2 / (w1 * w1));
      b[i * g.ny() + j] = std::exp(-r2 / (w2 * w2));
    }
  const cplx ip = inner_product(Field(g, Rank::spatial2d, std::move(a)), Field(g, Rank::spatial2d, std::move(b)));
  const double expect = std::numbers::pi * w1 * w1 * w2 * w2 / (w1 * w1 + w2 * w2);
  EXPECT_NEAR(ip.real() / expect, 1.0, 1e-12);
}

TEST(Transform, RoundTripAndParseval) {
  const Grid3D g = make_grid(32, 16, 64, 1e-3, 2e-3, 4e-12);
  for (Rank r : {Rank::spatial2d, Rank::spatiotemporal3d}) {
    const Field f = random_field(g, r, 11);
    const Field F = transform(f, Direction::forward);
    EXPECT_EQ(F.domain(), Domain::spectral);
    double e2 = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i) {
      e2 += std::norm(F[i]);
      fn += std::norm(f[i]);
    }
    EXPECT_NEAR(e2 / fn, 1.0, 1e-12);
    const Field back = transform(F, Direction::inverse);
    double worst = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(back[i] - f[i]));
    EXPECT_LE(worst, 1e-12);
  }
}

TEST(Transform, ConstantFieldIsDcDelta) {
  const Grid3D g = make_grid(16, 16, 8, 1.0, 1.0, 1.0);
  const Field f(g, Rank::spatial2d, Samples(g.spatial_size(), cplx{2.0, -1.0}));
  const Field F = transform(f, Direction::forward);
  EXPECT_NEAR(std::abs(F[0]), std::abs(cplx{2.0, -1.0}) * 16.0, 1e-12);
  for (std::size_t i = 1; i < F.size(); ++i) EXPECT_LT(std::abs(F[i]), 1e-13);
}

TEST(Transform, MatchesDirectSummation) {
  const Grid3D g = make_grid(8, 16, 8, 1.0, 1.0, 1.0);
  const Field f = random_field(g, Rank::spatiotemporal3d, 5);
  std::vector<cplx> ref(f.samples().begin(), f.samples().end());
  const std::array<std::size_t, 3> dims{8, 16, 8};
  for (int axis = 0; axis < 3; ++axis) naive_dft_axis(ref, dims, axis, -1);
  const Field F = transform(f, Direction::forward);
  const double scale = 1.0 / std::sqrt(static_cast<double>(f.size()));
  for (std::size_t i = 0; i < F.size(); ++i) EXPECT_LT(std::abs(F[i] - ref[i] * scale), 1e-12);
}

TEST(Transform, ShapeErrors) {
  const Grid3D g = make_grid(8, 8, 8, 1.0, 1.0, 1.0);
  EXPECT_THROW(transform(Field::zeros(g, Rank::temporal1d), Direction::forward), ShapeError);
  const Field F = transform(Field::zeros(g, Rank::spatial2d), Direction::forward);
  EXPECT_THROW(transform(F, Direction::forward), ShapeError);
  EXPECT_THROW(transform(Field::zeros(g, Rank::spatial2d), Direction::inverse), ShapeError);
}

TEST(FieldSlices, PeakSliceAndProfile) {
  const Grid3D g = make_grid(8, 8, 16, 1.0, 1.0, 1.0);
  Samples s(g.size());
  s[(3 * 8 + 5) * 16 + 9] = {0.0, 4.0};
  const Field f(g, Rank::spatiotemporal3d, std::move(s));
  const PeakIndex pk = peak_index(f);
  EXPECT_EQ(pk.ix, 3u);
  EXPECT_EQ(pk.iy, 5u);
  EXPECT_EQ(pk.it, 9u);
  EXPECT_EQ(spatial_slice(f, 9).at(3, 5), cplx(0.0, 4.0));
  EXPECT_EQ(temporal_profile(f, 3, 5)[9], cplx(0.0, 4.0));
}

TEST(FieldCsv, SpatialRoundTripIsExact) {
  const Grid3D g = make_grid(8, 16, 8, 1e-3, 2e-3, 1e-12);
  const Field f = random_field(g, Rank::spatial2d, 3).scaled(1e-7);
  std::stringstream ss;
  write_field_csv(ss, f);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "x,y,re,im");
  ss.seekg(0);
  const Field back = read_field_csv(ss, g);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(back[i], f[i]);
}

TEST(FieldCsv, TemporalRoundTripIsExact) {
  const Grid3D g = make_grid(8, 8, 32, 1e-3, 1e-3, 4e-12);
  const Field f = random_field(g, Rank::temporal1d, 4);
  std::stringstream ss;
  write_field_csv(ss, f);
  const Field back = read_field_csv(ss, g);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(back[i], f[i]);
  std::stringstream again;
  write_field_csv(again, f);
  std::string header;
  std::getline(again, header);
  EXPECT_EQ(header, "t,re,im");
}

TEST(FieldCsv, RejectsThreeDimensionalFields) {
  const Grid3D g = make_grid(8, 8, 8, 1.0, 1.0, 1.0);
  std::stringstream ss;
  EXPECT_THROW(write_field_csv(ss, Field::zeros(g, Rank::spatiotemporal3d)), ShapeError);
}
