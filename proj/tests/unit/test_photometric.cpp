#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "plk/optim_fit.hpp"
#include "plk/photometric.hpp"
#include "test_util.hpp"

namespace plk {
namespace {

CameraIntrinsics cam_for(std::int64_t h, std::int64_t w) {
  CameraIntrinsics c;
  c.f = 0.625 * static_cast<double>(w);
  c.cx = 0.5 * static_cast<double>(w - 1);
  c.cy = 0.5 * static_cast<double>(h - 1);
  c.width = w;
  c.height = h;
  return c;
}

DenseGrid coords_grid(std::size_t h, std::size_t w, double u, double v) {
  DenseGrid c({static_cast<std::int64_t>(h), static_cast<std::int64_t>(w)}, 2);
  for (std::size_t p = 0; p < h * w; ++p) {
    c[2 * p] = u;
    c[2 * p + 1] = v;
  }
  return c;
}

TEST(ReprojectCoords, IdentityPoseIsExact) {
  std::mt19937_64 rng(1);
  const CameraIntrinsics cam = cam_for(12, 16);
  const DenseGrid d = test::random_grid(rng, {12, 16}, 1, 0.1, 80.0);
  const DenseGrid c = reproject_coords(d, PoseSE3::identity(), cam);
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      EXPECT_EQ(c.at(y, x, 0), static_cast<double>(x));
      EXPECT_EQ(c.at(y, x, 1), static_cast<double>(y));
    }
  }
}

TEST(ReprojectCoords, LateralTranslationShiftsByDisparity) {
  const CameraIntrinsics cam = cam_for(12, 16);
  const double b = 0.3, depth = 7.0;
  const DenseGrid c =
      reproject_coords(DenseGrid({12, 16}, 1, depth), PoseSE3::translation(Vec3(b, 0, 0)), cam);
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      EXPECT_NEAR(c.at(y, x, 0), static_cast<double>(x) + cam.f * b / depth, 1e-12);
      EXPECT_EQ(c.at(y, x, 1), static_cast<double>(y));
    }
  }
}

TEST(ReprojectCoords, MatchesDirectOracle) {
  std::mt19937_64 rng(2);
  const CameraIntrinsics cam = cam_for(12, 16);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const PoseSE3 pose = PoseSE3::from_axis_angle(Vec3(u(rng), u(rng), u(rng)).normalized(),
                                                  0.1 * u(rng), Vec3(u(rng), u(rng), u(rng)));
    const DenseGrid d = test::random_grid(rng, {12, 16}, 1, 2.0, 30.0);
    const DenseGrid c = reproject_coords(d, pose, cam);
    for (std::size_t y = 0; y < 12; ++y) {
      for (std::size_t x = 0; x < 16; ++x) {
        const auto want = oracle::reproject(static_cast<double>(x), static_cast<double>(y),
                                            d.at(y, x), pose, cam);
        EXPECT_NEAR(c.at(y, x, 0), want[0], 1e-9);
        EXPECT_NEAR(c.at(y, x, 1), want[1], 1e-9);
      }
    }
  }
}

TEST(ReprojectCoords, BehindCameraMarkedInvalid) {
  const CameraIntrinsics cam = cam_for(4, 4);
  const PoseSE3 flip = PoseSE3::from_axis_angle(Vec3(0, 1, 0), std::numbers::pi);
  const DenseGrid c = reproject_coords(DenseGrid({4, 4}, 1, 3.0), flip, cam);
  for (double v : c.values()) EXPECT_EQ(v, -1.0);
  const DenseGrid g = reproject_coords_grad(DenseGrid({4, 4}, 1, 3.0), flip, cam);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(ReprojectCoords, Errors) {
  const CameraIntrinsics cam = cam_for(4, 4);
  DenseGrid d({4, 4}, 1, 1.0);
  d[5] = 0.0;
  EXPECT_PLK_ERROR(reproject_coords(d, PoseSE3::identity(), cam), ErrorCode::InvalidDepth);
  EXPECT_PLK_ERROR(reproject_coords(DenseGrid({4, 5}, 1, 1.0), PoseSE3::identity(), cam),
                   ErrorCode::InvalidShape);
}

TEST(ReprojectCoordsGrad, MatchesFiniteDifference) {
  std::mt19937_64 rng(3);
  const CameraIntrinsics cam = cam_for(6, 8);
  const PoseSE3 pose = PoseSE3::from_axis_angle(Vec3(0.2, 1, 0.1).normalized(), 0.05,
                                                Vec3(0.4, -0.1, 0.2));
  const DenseGrid d = test::random_grid(rng, {6, 8}, 1, 2.0, 20.0);
  const DenseGrid g = reproject_coords_grad(d, pose, cam);
  for (std::size_t comp = 0; comp < 2; ++comp) {
    DenseGrid ana = DenseGrid::like(d);
    for (std::size_t p = 0; p < d.size(); ++p) ana[p] = g[2 * p + comp];
    auto f = [&](const DenseGrid& x) {
      const DenseGrid c = reproject_coords(x, pose, cam);
      double acc = 0.0;
      for (std::size_t p = 0; p < x.size(); ++p) acc += c[2 * p + comp];
      return acc;
    };
    EXPECT_TRUE(grad_check(ana, finite_diff_grad(f, d), 1e-4, 1e-7).passed);
  }
}

TEST(BilinearSample, LatticeMidpointAndBounds) {
  DenseGrid src({2, 2}, 1);
  src.values() = {2, 4, 6, 8};
  const WarpResult mid = bilinear_sample(src, coords_grid(1, 1, 0.5, 0.0));
  EXPECT_EQ(mid.image[0], 3.0);
  EXPECT_EQ(mid.valid_mask[0], 1.0);
  for (std::size_t y = 0; y < 2; ++y) {
    for (std::size_t x = 0; x < 2; ++x) {
      const WarpResult r = bilinear_sample(
          src, coords_grid(1, 1, static_cast<double>(x), static_cast<double>(y)));
      EXPECT_EQ(r.image[0], src.at(y, x));
      EXPECT_EQ(r.valid_mask[0], 1.0);
    }
  }
  for (auto [u, v] : {std::pair{-0.01, 0.0}, {1.01, 0.5}, {0.5, 1.0001}, {0.2, -1.0}}) {
    const WarpResult r = bilinear_sample(src, coords_grid(1, 1, u, v));
    EXPECT_EQ(r.image[0], 0.0);
    EXPECT_EQ(r.valid_mask[0], 0.0);
  }
}

TEST(BilinearSample, MatchesOracleMultiChannel) {
  std::mt19937_64 rng(4);
  const DenseGrid src = test::random_grid(rng, {7, 9}, 3, 0.0, 1.0);
  const DenseGrid coords = [&] {
    DenseGrid c({5, 6}, 2);
    std::uniform_real_distribution<double> u(-1.0, 9.0), v(-1.0, 7.0);
    for (std::size_t p = 0; p < 30; ++p) {
      c[2 * p] = u(rng);
      c[2 * p + 1] = v(rng);
    }
    c[0] = 8.0;  // right edge, exact
    c[1] = 6.0;
    return c;
  }();
  const WarpResult r = bilinear_sample(src, coords);
  for (std::size_t p = 0; p < 30; ++p) {
    for (std::size_t ch = 0; ch < 3; ++ch) {
      double want = 0.0;
      const bool ok = oracle::bilinear(src, coords[2 * p], coords[2 * p + 1], ch, want);
      EXPECT_EQ(r.valid_mask[p], ok ? 1.0 : 0.0);
      EXPECT_NEAR(r.image[3 * p + ch], ok ? want : 0.0, 1e-14);
    }
  }
}

TEST(BilinearSampleGrad, SrcAndCoordsMatchOracle) {
  std::mt19937_64 rng(5);
  const DenseGrid src = test::random_grid(rng, {6, 8}, 2, 0.0, 1.0);
  DenseGrid coords({4, 5}, 2);
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  std::uniform_int_distribution<int> ui(0, 6), vi(0, 4);
  for (std::size_t p = 0; p < 20; ++p) {
    coords[2 * p] = ui(rng) + frac(rng);
    coords[2 * p + 1] = vi(rng) + frac(rng);
  }
  const DenseGrid up = test::random_grid(rng, {4, 5}, 2, -1.0, 1.0);
  const BilinearGrad g = bilinear_sample_grad(src, coords, up);
  auto dot = [&](const DenseGrid& s, const DenseGrid& c) {
    const WarpResult r = bilinear_sample(s, c);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.image.size(); ++i) acc += up[i] * r.image[i];
    return acc;
  };
  EXPECT_TRUE(grad_check(g.src, finite_diff_grad([&](const DenseGrid& s) { return dot(s, coords); },
                                                 src),
                         1e-4, 1e-7)
                  .passed);
  EXPECT_TRUE(
      grad_check(g.coords,
                 finite_diff_grad([&](const DenseGrid& c) { return dot(src, c); }, coords), 1e-4,
                 1e-7)
          .passed);
}

TEST(Ssim, IdenticalAndConstantImages) {
  std::mt19937_64 rng(6);
  const SsimConfig cfg;
  const DenseGrid a = test::random_grid(rng, {9, 11}, 3, 0.0, 1.0);
  const DenseGrid saa = ssim(a, a, cfg);
  for (double v : saa.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  const DenseGrid c({5, 5}, 1, 0.37);
  const DenseGrid scc = ssim(c, c, cfg);
  for (double v : scc.values()) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(Ssim, ZeroVersusOneClosedForm) {
  SsimConfig cfg;
  cfg.c1 = 1e-4;
  cfg.c2 = 9e-4;
  const DenseGrid a({6, 7}, 2, 0.0), b({6, 7}, 2, 1.0);
  const DenseGrid s = ssim(a, b, cfg);
  for (double v : s.values()) EXPECT_NEAR(v, 1e-4 / (1.0 + 1e-4), 1e-15);
}

TEST(Ssim, MatchesCroppedWindowOracle) {
  std::mt19937_64 rng(7);
  for (int window : {3, 5, 7}) {
    SsimConfig cfg;
    cfg.window = window;
    const DenseGrid a = test::random_grid(rng, {8, 10}, 3, 0.0, 1.0);
    const DenseGrid b = test::random_grid(rng, {8, 10}, 3, 0.0, 1.0);
    const DenseGrid want = oracle::ssim(a, b, cfg.c1, cfg.c2, window);
    EXPECT_LE(test::max_abs_diff(ssim(a, b, cfg), want), 1e-12) << window;
  }
}

TEST(Ssim, Validation) {
  SsimConfig cfg;
  cfg.window = 4;
  EXPECT_PLK_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
  cfg = {};
  cfg.c2 = 0.0;
  EXPECT_PLK_ERROR(cfg.validate(), ErrorCode::InvalidConfig);
  EXPECT_PLK_ERROR(ssim(DenseGrid({3, 3}, 1), DenseGrid({3, 4}, 1), SsimConfig{}),
                   ErrorCode::InvalidShape);
}

TEST(SsimGrad, MatchesFiniteDifference) {
  std::mt19937_64 rng(8);
  const SsimConfig cfg;
  const DenseGrid a = test::random_grid(rng, {5, 6}, 3, 0.0, 1.0);
  const DenseGrid b = test::random_grid(rng, {5, 6}, 3, 0.0, 1.0);
  const DenseGrid up = test::random_grid(rng, {5, 6}, 1, -1.0, 1.0);
  auto f = [&](const DenseGrid& x) {
    const DenseGrid s = ssim(x, b, cfg);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) acc += up[i] * s[i];
    return acc;
  };
  EXPECT_TRUE(grad_check(ssim_grad(a, b, cfg, up), finite_diff_grad(f, a), 1e-4, 1e-7).passed);
}

TEST(PhotometricError, ClosedFormsAndOracle) {
  SsimConfig cfg;
  cfg.c1 = 1e-4;
  cfg.c2 = 9e-4;
  const DenseGrid a({4, 5}, 3, 0.0), b({4, 5}, 3, 1.0);
  const GradPair r = photometric_error(a, b, 0.85, cfg);
  const double want = 0.425 * (1.0 - 1e-4 / (1.0 + 1e-4)) + 0.15;
  EXPECT_NEAR(r.value, want, 1e-12);
  EXPECT_NEAR(r.value, 0.574958, 1e-6);
  for (double v : r.map.values()) EXPECT_NEAR(v, want, 1e-12);

  const GradPair same = photometric_error(b, b, 0.85, cfg);
  EXPECT_EQ(same.value, 0.0);
  for (double v : same.map.values()) EXPECT_EQ(v, 0.0);

  std::mt19937_64 rng(9);
  const DenseGrid x = test::random_grid(rng, {7, 8}, 3, 0.0, 1.0);
  const DenseGrid y = test::random_grid(rng, {7, 8}, 3, 0.0, 1.0);
  const DenseGrid want_map = oracle::pe_map(x, y, 0.85, cfg.c1, cfg.c2, cfg.window);
  const DenseGrid got_map = photometric_error_map(x, y, 0.85, cfg);
  EXPECT_LE(test::max_abs_diff(got_map, want_map), 1e-12);
  for (double v : got_map.values()) EXPECT_GE(v, 0.0);
}

TEST(PhotometricError, MaskedMean) {
  std::mt19937_64 rng(10);
  const SsimConfig cfg;
  const DenseGrid a = test::random_grid(rng, {4, 4}, 1, 0.0, 1.0);
  const DenseGrid b = test::random_grid(rng, {4, 4}, 1, 0.0, 1.0);
  DenseGrid mask({4, 4}, 1, 0.0);
  mask[1] = mask[6] = mask[15] = 1.0;
  const DenseGrid m = photometric_error_map(a, b, 0.85, cfg);
  EXPECT_NEAR(photometric_error(a, b, 0.85, cfg, &mask).value, (m[1] + m[6] + m[15]) / 3.0,
              1e-15);
}

TEST(PhotometricError, GradientsMatchOracle) {
  std::mt19937_64 rng(11);
  const SsimConfig cfg;
  const DenseGrid a = test::random_grid(rng, {6, 7}, 3, 0.0, 1.0);
  DenseGrid b = test::random_grid(rng, {6, 7}, 3, 0.0, 1.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (std::abs(a[i] - b[i]) < 1e-3) b[i] = a[i] + 2e-3;
  }
  const GradPair r = photometric_error(a, b, 0.85, cfg);
  auto fa = [&](const DenseGrid& x) { return photometric_error(x, b, 0.85, cfg).value; };
  auto fb = [&](const DenseGrid& x) { return photometric_error(a, x, 0.85, cfg).value; };
  EXPECT_TRUE(grad_check(r.grad_wrt("a"), finite_diff_grad(fa, a), 1e-4, 1e-7).passed);
  EXPECT_TRUE(grad_check(r.grad_wrt("b"), finite_diff_grad(fb, b), 1e-4, 1e-7).passed);
}

TEST(SelfSupervised, IdentityPosesIdenticalFramesIsZero) {
  std::mt19937_64 rng(12);
  const CameraIntrinsics cam = cam_for(12, 16);
  const DenseGrid img = test::random_grid(rng, {12, 16}, 3, 0.0, 1.0);
  const DenseGrid d = test::random_grid(rng, {12, 16}, 1, 1.0, 50.0);
  const GradPair r = self_supervised_loss(img, img, img, d, PoseSE3::identity(),
                                          PoseSE3::identity(), cam, PhotometricConfig{});
  EXPECT_EQ(r.value, 0.0);
  ViewSynthesisLoss vs(img, {{img, PoseSE3::identity()}}, d, cam, PhotometricConfig{});
  EXPECT_EQ(vs.warp(0).image.values(), img.values());
  EXPECT_EQ(vs.valid_count(), img.pixels());
}

TEST(SelfSupervised, SceneConsistencyAndDepthPerturbation) {
  for (SceneKind kind : {SceneKind::plane, SceneKind::two_planes}) {
    const SyntheticScene s = make_scene(kind, 48, 64, default_camera(48, 64), 1.0, 7);
    auto loss = [&](double scale) {
      DenseGrid d = s.gt_depth;
      for (double& v : d.values()) v *= scale;
      ViewSynthesisLoss vs(s.image_t, {{s.image_prev, s.pose_to_prev}, {s.image_next, s.pose_to_next}},
                           d, s.cam, PhotometricConfig{});
      return vs.mean();
    };
    const double base = loss(1.0);
    EXPECT_LT(base, 1e-3) << to_string(kind);
    EXPECT_GT(loss(1.1), base) << to_string(kind);
    EXPECT_GT(loss(0.9), base) << to_string(kind);
  }
}

TEST(ViewSynthesis, MeanCombineAndValidMask) {
  const SyntheticScene s = make_scene(SceneKind::plane, 16, 20, default_camera(16, 20), 1.0, 3);
  PhotometricConfig mean_cfg;
  mean_cfg.combine = ViewCombine::mean;
  ViewSynthesisLoss mn(s.image_t, {{s.image_prev, s.pose_to_prev}, {s.image_next, s.pose_to_next}},
                       s.gt_depth, s.cam, PhotometricConfig{});
  ViewSynthesisLoss me(s.image_t, {{s.image_prev, s.pose_to_prev}, {s.image_next, s.pose_to_next}},
                       s.gt_depth, s.cam, mean_cfg);
  EXPECT_EQ(mn.valid_mask().values(), me.valid_mask().values());
  std::size_t count = 0;
  for (std::size_t p = 0; p < mn.pe_map().size(); ++p) {
    if (mn.valid_mask()[p] == 0.0) {
      EXPECT_EQ(mn.pe_map()[p], 0.0);
      continue;
    }
    ++count;
    EXPECT_LE(mn.pe_map()[p], me.pe_map()[p] + 1e-15);
  }
  EXPECT_EQ(count, mn.valid_count());
  // Each view alone loses the border strip its motion pushes out of frame.
  for (std::size_t v = 0; v < 2; ++v) {
    double inside = 0.0;
    for (double m : mn.warp(v).valid_mask.values()) inside += m;
    EXPECT_LT(inside, static_cast<double>(s.image_t.pixels()));
  }
}

}  // namespace
}  // namespace plk
