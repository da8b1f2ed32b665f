#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "plk/soft_quant.hpp"
#include "test_util.hpp"

namespace plk {
namespace {

VoxelGridSpec cube_spec(std::int64_t n, double edge = 1.0,
                        Neighborhood nb = Neighborhood::faces6) {
  VoxelGridSpec s;
  s.bins = {n, n, n};
  s.bin_size = Vec3::Constant(edge);
  s.sigma = edge;
  s.neighborhood = nb;
  return s;
}

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n, const Vec3& lo,
                                const Vec3& hi) {
  std::vector<Vec3> pts(n);
  for (Vec3& p : pts) {
    for (int a = 0; a < 3; ++a) p[a] = std::uniform_real_distribution<double>(lo[a], hi[a])(rng);
  }
  return pts;
}

TEST(VoxelGridSpec, Validation) {
  VoxelGridSpec s;
  EXPECT_NO_THROW(s.validate());
  s.sigma = 0.0;
  EXPECT_PLK_ERROR(s.validate(), ErrorCode::InvalidConfig);
  s = {};
  s.bin_size.y() = -1.0;
  EXPECT_PLK_ERROR(s.validate(), ErrorCode::InvalidConfig);
  s = {};
  s.bins[2] = 0;
  EXPECT_PLK_ERROR(s.validate(), ErrorCode::InvalidConfig);
  EXPECT_PLK_ERROR(neighborhood_from_string("faces8"), ErrorCode::InvalidConfig);
}

TEST(NeighborBins, CountsInGridNeighboursOnly) {
  const VoxelGridSpec f = cube_spec(3);
  EXPECT_EQ(neighbor_bins(f, f.flat_index(1, 1, 1)).size(), 6u);
  EXPECT_EQ(neighbor_bins(f, f.flat_index(0, 0, 0)).size(), 3u);
  EXPECT_EQ(neighbor_bins(f, f.flat_index(0, 1, 1)).size(), 5u);
  const VoxelGridSpec g = cube_spec(3, 1.0, Neighborhood::full26);
  EXPECT_EQ(neighbor_bins(g, g.flat_index(1, 1, 1)).size(), 26u);
  EXPECT_EQ(neighbor_bins(g, g.flat_index(0, 0, 0)).size(), 7u);
  EXPECT_TRUE(neighbor_bins(cube_spec(1), 0).empty());
}

TEST(AssignBins, CentreFaceAndOutside) {
  const VoxelGridSpec s = cube_spec(4);
  const std::vector<Vec3> pts{{1.5, 2.5, 0.5}, {2.0, 2.5, 0.5}, {0.0, 0.0, 0.0},
                              {4.0, 4.0, 4.0}, {-0.1, 1, 1},    {1, 4.01, 1}};
  const auto a = assign_bins(pts, s);
  EXPECT_EQ(a[0], static_cast<std::int64_t>(s.flat_index(1, 2, 0)));
  EXPECT_EQ(a[1], static_cast<std::int64_t>(s.flat_index(1, 2, 0)));
  EXPECT_EQ(a[2], 0);
  EXPECT_EQ(a[3], static_cast<std::int64_t>(s.flat_index(3, 3, 3)));
  EXPECT_EQ(a[4], kOutsideGrid);
  EXPECT_EQ(a[5], kOutsideGrid);
  EXPECT_EQ(a, oracle::assign_bins(pts, s));
}

TEST(AssignBins, MatchesExhaustiveArgmin) {
  std::mt19937_64 rng(21);
  VoxelGridSpec s = cube_spec(8, 0.5);
  s.origin = Vec3(-1.0, 0.25, 3.0);
  auto pts = random_points(rng, 1000, s.origin - Vec3::Constant(0.3),
                           s.origin + Vec3::Constant(4.3));
  // Points on shared faces exercise the tie rule.
  for (int i = 0; i < 50; ++i) {
    Vec3 p = pts[static_cast<std::size_t>(i)];
    p.x() = s.origin.x() + 0.5 * static_cast<double>(i % 9);
    pts.push_back(p);
  }
  EXPECT_EQ(assign_bins(pts, s), oracle::assign_bins(pts, s));
}

TEST(SoftQuantize, SingleCentredPoint) {
  const VoxelGridSpec s = cube_spec(3);
  const DenseGrid t = soft_quantize(std::vector<Vec3>{s.center(1, 1, 1)}, s);
  EXPECT_EQ(t.at3(1, 1, 1), 1.0);
  // Each face neighbour sees the point through its neighbour average.
  const double k = std::exp(-1.0);
  EXPECT_NEAR(t.at3(0, 1, 1), k / 5.0, 1e-15);
  EXPECT_NEAR(t.at3(1, 1, 2), k / 5.0, 1e-15);
  EXPECT_EQ(t.at3(0, 0, 1), 0.0);
  EXPECT_EQ(t.at3(0, 0, 0), 0.0);
}

TEST(SoftQuantize, KernelAtDistanceSigma) {
  VoxelGridSpec s = cube_spec(1, 4.0);
  s.sigma = 1.5;
  const Vec3 p = s.center(0, 0, 0) + Vec3(0, 1.5, 0);
  EXPECT_NEAR(soft_quantize(std::vector<Vec3>{p}, s)[0], std::exp(-1.0), 1e-15);
}

TEST(SoftQuantize, EmptyCloud) {
  const DenseGrid t = soft_quantize(std::vector<Vec3>{}, cube_spec(4));
  for (double v : t.values()) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(soft_quantize_grad(std::vector<Vec3>{}, cube_spec(4), t).empty());
}

TEST(SoftQuantize, MatchesDoubleLoopOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::int64_t> nbins(1, 8);
  std::uniform_int_distribution<std::size_t> npts(0, 1000);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    VoxelGridSpec s;
    s.bins = {nbins(rng), nbins(rng), nbins(rng)};
    s.bin_size = Vec3(u(rng), u(rng), u(rng));
    s.origin = Vec3(u(rng) - 1.0, u(rng) - 1.0, u(rng) - 1.0);
    s.sigma = u(rng);
    s.neighborhood = inst % 2 == 0 ? Neighborhood::faces6 : Neighborhood::full26;
    ASSERT_LE(s.bin_count(), 512u);
    const Vec3 ext(s.bin_size.x() * static_cast<double>(s.bins[0]),
                   s.bin_size.y() * static_cast<double>(s.bins[1]),
                   s.bin_size.z() * static_cast<double>(s.bins[2]));
    const auto pts = random_points(rng, npts(rng), s.origin - 0.1 * ext, s.origin + 1.1 * ext);
    const DenseGrid got = soft_quantize(pts, s);
    const DenseGrid want = oracle::soft_quantize(pts, s);
    ASSERT_TRUE(got.same_shape(want));
    const double d = test::max_abs_diff(got, want);
    worst = std::max(worst, d);
    EXPECT_LE(d, 1e-9) << "instance " << inst;
    for (double v : got.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 2.0);
    }
  }
  RecordProperty("max_abs_diff", std::to_string(worst));
}

TEST(SoftQuantize, CloudOverloadMatchesVector) {
  std::mt19937_64 rng(3);
  const VoxelGridSpec s = cube_spec(4);
  PointCloud pc;
  pc.points = random_points(rng, 100, Vec3::Zero(), Vec3::Constant(4.0));
  pc.source_pixels.resize(100);
  const DenseGrid a = soft_quantize(pc, s), b = soft_quantize(pc.points, s);
  EXPECT_EQ(a.values(), b.values());
}

TEST(SoftQuantize, TranslationEquivariance) {
  // Dyadic coordinates and shifts keep every subtraction exact, so the
  // tensors must agree to the last bit.
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> q(0, 4 * 1024);
  VoxelGridSpec s = cube_spec(4, 1.0, Neighborhood::full26);
  std::vector<Vec3> pts(300);
  for (Vec3& p : pts) p = Vec3(q(rng), q(rng), q(rng)) / 1024.0;
  const DenseGrid base = soft_quantize(pts, s);
  for (const Vec3 shift : {Vec3(8, -16, 32), Vec3(0.5, 0.25, -0.125), Vec3(-1024, 2, 64)}) {
    VoxelGridSpec t = s;
    t.origin += shift;
    std::vector<Vec3> moved = pts;
    for (Vec3& p : moved) p += shift;
    const DenseGrid got = soft_quantize(moved, t);
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_LE(std::abs(got[i] - base[i]),
                std::nextafter(base[i], INFINITY) - base[i]) << i;
    }
  }
  // Non-dyadic shifts: equal up to rounding of the shifted inputs.
  VoxelGridSpec t = s;
  const Vec3 shift(0.3, -1.7, 2.9);
  t.origin += shift;
  std::vector<Vec3> moved = pts;
  for (Vec3& p : moved) p += shift;
  EXPECT_LE(test::max_abs_diff(soft_quantize(moved, t), base), 1e-12);
}

TEST(SoftQuantize, WideKernelLimit) {
  VoxelGridSpec s = cube_spec(3, 0.7);
  s.sigma = 1e6 * 0.7;
  std::mt19937_64 rng(4);
  const Vec3 c = s.center(1, 1, 1);
  const auto pts = random_points(rng, 20, c - Vec3::Constant(0.34), c + Vec3::Constant(0.34));
  const DenseGrid t = soft_quantize(pts, s);
  EXPECT_GE(t.at3(1, 1, 1), 1.0 - 1e-6);
  EXPECT_LE(t.at3(1, 1, 1), 1.0);
  double prev = 0.0;
  for (double sig : {0.1, 0.3, 1.0, 3.0, 10.0}) {
    s.sigma = sig;
    const double v = soft_quantize(pts, s).at3(1, 1, 1);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(SoftQuantizeGrad, VanishesAtKernelPeak) {
  const VoxelGridSpec s = cube_spec(1);
  const auto g =
      soft_quantize_grad(std::vector<Vec3>{s.center(0, 0, 0)}, s, DenseGrid({1, 1, 1}, 1, 1.0));
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0], Vec3::Zero());
}

TEST(SoftQuantizeGrad, MatchesOracleAwayFromBoundaries) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    VoxelGridSpec s = cube_spec(4, 0.8, trial % 2 ? Neighborhood::full26 : Neighborhood::faces6);
    std::vector<Vec3> pts;
    std::uniform_real_distribution<double> frac(0.02, 0.98);
    std::uniform_int_distribution<int> bin(0, 3);
    for (int n = 0; n < 50; ++n) {
      Vec3 p;
      for (int a = 0; a < 3; ++a) p[a] = (bin(rng) + frac(rng)) * 0.8;
      pts.push_back(p);
    }
    const DenseGrid up = test::random_grid(rng, {4, 4, 4}, 1, -1.0, 1.0);
    const auto g = soft_quantize_grad(pts, s, up);
    DenseGrid flat({static_cast<std::int64_t>(pts.size()), 3}, 1);
    for (std::size_t n = 0; n < pts.size(); ++n)
      for (int a = 0; a < 3; ++a) flat.at(n, static_cast<std::size_t>(a)) = pts[n][a];
    auto f = [&](const DenseGrid& x) {
      std::vector<Vec3> q(pts.size());
      for (std::size_t n = 0; n < q.size(); ++n) q[n] = Vec3(x.at(n, 0), x.at(n, 1), x.at(n, 2));
      const DenseGrid t = soft_quantize(q, s);
      double acc = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) acc += up[i] * t[i];
      return acc;
    };
    const DenseGrid num = finite_diff_grad(f, flat);
    DenseGrid ana = DenseGrid::like(flat);
    for (std::size_t n = 0; n < pts.size(); ++n)
      for (int a = 0; a < 3; ++a) ana.at(n, static_cast<std::size_t>(a)) = g[n][a];
    const GradCheckReport r = grad_check(ana, num, 1e-4, 1e-7);
    EXPECT_TRUE(r.passed) << "worst " << r.worst_index << " rel " << r.max_rel_error;
  }
}

TEST(SoftQuantizeGrad, OutsidePointsGetZeroAndShapeChecked) {
  const VoxelGridSpec s = cube_spec(2);
  const std::vector<Vec3> pts{{5, 5, 5}, {0.7, 0.6, 0.2}};
  const auto g = soft_quantize_grad(pts, s, DenseGrid({2, 2, 2}, 1, 1.0));
  EXPECT_EQ(g[0], Vec3::Zero());
  EXPECT_NE(g[1], Vec3::Zero());
  EXPECT_PLK_ERROR(soft_quantize_grad(pts, s, DenseGrid({2, 2, 3}, 1, 1.0)),
                   ErrorCode::InvalidShape);
}

TEST(BevFlatten, ZeroAndSingleVoxel) {
  DenseGrid t({3, 4, 5}, 1, 0.0);
  for (BevMode m : {BevMode::max, BevMode::sum}) {
    const DenseGrid b = bev_flatten(t, m);
    for (double v : b.values()) EXPECT_EQ(v, 0.0);
  }
  t.at3(1, 2, 3) = 0.7;
  for (BevMode m : {BevMode::max, BevMode::sum}) {
    const DenseGrid b = bev_flatten(t, m);
    ASSERT_EQ(b.dims(), (std::vector<std::size_t>{3, 4}));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(b.at(i, j), (i == 1 && j == 2) ? 0.7 : 0.0);
  }
}

TEST(BevFlatten, SumAndMaxMatchManualReduction) {
  std::mt19937_64 rng(12);
  const DenseGrid t = test::random_grid(rng, {4, 4, 3}, 1, 0.0, 2.0);
  const DenseGrid s = bev_flatten(t, BevMode::sum);
  const DenseGrid m = bev_flatten(t, BevMode::max);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double acc = 0.0, best = -1.0;
      for (std::size_t k = 0; k < 3; ++k) {
        acc += t.at3(i, j, k);
        best = std::max(best, t.at3(i, j, k));
      }
      EXPECT_NEAR(s.at(i, j), acc, 1e-15);
      EXPECT_EQ(m.at(i, j), best);
    }
  }
}

TEST(BevFlatten, OtherAxes) {
  std::mt19937_64 rng(13);
  const DenseGrid t = test::random_grid(rng, {2, 3, 4}, 1, 0.0, 1.0);
  const DenseGrid b0 = bev_flatten(t, BevMode::sum, 0);
  ASSERT_EQ(b0.dims(), (std::vector<std::size_t>{3, 4}));
  EXPECT_NEAR(b0.at(2, 1), t.at3(0, 2, 1) + t.at3(1, 2, 1), 1e-15);
  const DenseGrid b1 = bev_flatten(t, BevMode::max, 1);
  ASSERT_EQ(b1.dims(), (std::vector<std::size_t>{2, 4}));
  EXPECT_EQ(b1.at(1, 3), std::max({t.at3(1, 0, 3), t.at3(1, 1, 3), t.at3(1, 2, 3)}));
}

TEST(BevFlattenGrad, RoutesToArgmaxLowestTie) {
  DenseGrid t({1, 1, 4}, 1, 0.0);
  t[1] = 0.5;
  t[3] = 0.5;
  const DenseGrid up({1, 1}, 1, 2.0);
  const DenseGrid gm = bev_flatten_grad(t, BevMode::max, up);
  EXPECT_EQ(gm.values(), (std::vector<double>{0, 2, 0, 0}));
  const DenseGrid gs = bev_flatten_grad(t, BevMode::sum, up);
  EXPECT_EQ(gs.values(), (std::vector<double>{2, 2, 2, 2}));
}

}  // namespace
}  // namespace plk
