#include "plk/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "plk/camera.hpp"
#include "plk/depth_param.hpp"
#include "plk/error.hpp"
#include "plk/losses.hpp"
#include "plk/optim_fit.hpp"
#include "plk/photometric.hpp"
#include "plk/soft_quant.hpp"

namespace plk {

namespace {

using Rng = std::mt19937_64;

struct Check {
  std::string wrt;
  DenseGrid analytic;
  DenseGrid numeric;
  DenseGrid include;  // empty means every element
};

using TrialFn = std::function<std::vector<Check>(Rng&, std::uint64_t trial)>;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

DenseGrid random_grid(Rng& rng, std::vector<std::int64_t> dims, std::int64_t channels, double lo,
                      double hi) {
  DenseGrid g(std::move(dims), channels);
  for (double& v : g.values()) v = uniform(rng, lo, hi);
  return g;
}

// Value in [lo, hi] whose fractional part stays in [margin, 1 - margin].
double off_lattice(Rng& rng, double lo, double hi, double margin) {
  for (;;) {
    const double v = uniform(rng, lo, hi);
    const double frac = v - std::floor(v);
    if (frac >= margin && frac <= 1.0 - margin) return v;
  }
}

double weighted_sum(const DenseGrid& g, const DenseGrid& w) {
  std::vector<double> terms(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) terms[i] = g[i] * w[i];
  return pairwise_sum(terms);
}

DenseGrid numeric(const ScalarFn& f, const DenseGrid& x) { return finite_diff_grad(f, x); }

PoseSE3 random_pose(Rng& rng, double max_angle, double max_t) {
  const Vec3 axis(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  PoseSE3 p = PoseSE3::from_axis_angle(axis.normalized(), uniform(rng, -max_angle, max_angle),
                                       Vec3(uniform(rng, -max_t, max_t), uniform(rng, -max_t, max_t),
                                            uniform(rng, -0.2 * max_t, 0.2 * max_t)));
  return p;
}

CameraIntrinsics small_camera(Rng& rng, std::int64_t h, std::int64_t w) {
  CameraIntrinsics cam;
  cam.width = w;
  cam.height = h;
  cam.f = uniform(rng, 0.5, 1.0) * static_cast<double>(w);
  cam.cx = 0.5 * static_cast<double>(w - 1) + uniform(rng, -1, 1);
  cam.cy = 0.5 * static_cast<double>(h - 1) + uniform(rng, -1, 1);
  return cam;
}

// 1 where a pixel's sample coordinates in every view stay clear of the
// bilinear lattice, the source border and the image border.
DenseGrid smooth_region(const DenseGrid& depth, const std::vector<PoseSE3>& poses,
                        const CameraIntrinsics& cam, double margin) {
  const std::size_t H = depth.height(), W = depth.width();
  DenseGrid keep = DenseGrid::like(depth, 1.0);
  auto near_int = [&](double v) {
    const double frac = v - std::floor(v);
    return frac < margin || frac > 1.0 - margin;
  };
  for (const PoseSE3& pose : poses) {
    const DenseGrid c = reproject_coords(depth, pose, cam);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double u = c.at(y, x, 0), v = c.at(y, x, 1);
        const bool edge = std::abs(u) < margin || std::abs(v) < margin ||
                          std::abs(u - static_cast<double>(W - 1)) < margin ||
                          std::abs(v - static_cast<double>(H - 1)) < margin;
        if (near_int(u) || near_int(v) || edge) keep.at(y, x) = 0.0;
      }
    }
  }
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      if (y == 0 || x == 0 || y + 1 == H || x + 1 == W) keep.at(y, x) = 0.0;
    }
  }
  return keep;
}

std::vector<Check> trial_depth_param(Rng& rng, std::uint64_t) {
  DepthParamConfig cfg;
  cfg.sigma_min = uniform(rng, 0.01, 0.5);
  cfg.sigma_max = cfg.sigma_min + uniform(rng, 0.5, 10.0);
  cfg.d_prior = uniform(rng, 0.5, 5.0);
  const DenseGrid x = random_grid(rng, {12, 16}, 1, 0.05, 0.95);
  const DenseGrid w = random_grid(rng, {12, 16}, 1, -1, 1);
  const DenseGrid d = disparity_to_depth_grad(x, cfg);
  DenseGrid a = DenseGrid::like(x);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = w[i] * d[i];
  auto f = [&](const DenseGrid& xx) { return weighted_sum(disparity_to_depth(xx, cfg), w); };
  return {{"disparity", a, numeric(f, x), {}}};
}

// Disparity -> depth -> point cloud, pulled back to disparity.
std::vector<Check> trial_backproject(Rng& rng, std::uint64_t) {
  const std::int64_t H = 12, W = 16;
  const CameraIntrinsics cam = small_camera(rng, H, W);
  DepthParamConfig cfg;
  cfg.sigma_min = 0.1;
  cfg.sigma_max = 2.0;
  cfg.d_prior = uniform(rng, 1.0, 4.0);
  const DenseGrid x = random_grid(rng, {H, W}, 1, 0.05, 0.95);
  std::vector<Vec3> w(static_cast<std::size_t>(H * W));
  for (Vec3& v : w) v = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  const double lo = 1e-9, hi = 1e9;

  const DenseGrid depth = disparity_to_depth(x, cfg);
  const PointCloud cloud = backproject(depth, cam, lo, hi);
  const DenseGrid up = backproject_vjp(cloud, cam, w);
  const DenseGrid dd = disparity_to_depth_grad(x, cfg);
  DenseGrid a = DenseGrid::like(x);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = up[i] * dd[i];

  auto f = [&](const DenseGrid& xx) {
    const PointCloud c = backproject(disparity_to_depth(xx, cfg), cam, lo, hi);
    std::vector<double> terms(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) terms[i] = c.points[i].dot(w[i]);
    return pairwise_sum(terms);
  };
  return {{"disparity", a, numeric(f, x), {}}};
}

std::vector<Check> trial_soft_quantize(Rng& rng, std::uint64_t trial) {
  VoxelGridSpec spec;
  spec.bins = {std::uniform_int_distribution<std::int64_t>(2, 6)(rng),
               std::uniform_int_distribution<std::int64_t>(2, 6)(rng),
               std::uniform_int_distribution<std::int64_t>(2, 6)(rng)};
  spec.origin = Vec3(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, 0, 3));
  spec.bin_size = Vec3(uniform(rng, 0.3, 1.2), uniform(rng, 0.3, 1.2), uniform(rng, 0.3, 1.2));
  spec.sigma = uniform(rng, 0.5, 1.5) * VoxelGridSpec::default_sigma(spec.bin_size);
  spec.neighborhood = trial % 2 == 0 ? Neighborhood::faces6 : Neighborhood::full26;

  const std::int64_t n = std::uniform_int_distribution<std::int64_t>(1, 200)(rng);
  DenseGrid p({n}, 3);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int ax = 0; ax < 3; ++ax) {
      // Stay off bin boundaries so the home bin cannot switch under a probe.
      const double r = off_lattice(rng, 0.0, static_cast<double>(spec.bins[ax]), 0.02);
      p[static_cast<std::size_t>(i * 3 + ax)] = spec.origin[ax] + r * spec.bin_size[ax];
    }
  }
  auto to_points = [](const DenseGrid& g) {
    std::vector<Vec3> pts(g.size() / 3);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = Vec3(g[3 * i], g[3 * i + 1], g[3 * i + 2]);
    return pts;
  };
  const DenseGrid w =
      random_grid(rng, {spec.bins[0], spec.bins[1], spec.bins[2]}, 1, -1, 1);
  const std::vector<Vec3> g = soft_quantize_grad(to_points(p), spec, w);
  DenseGrid a = DenseGrid::like(p);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (int ax = 0; ax < 3; ++ax) a[3 * i + static_cast<std::size_t>(ax)] = g[i][ax];
  }
  auto f = [&](const DenseGrid& pp) { return weighted_sum(soft_quantize(to_points(pp), spec), w); };
  return {{"points", a, numeric(f, p), {}}};
}

std::vector<Check> trial_bev_flatten(Rng& rng, std::uint64_t trial) {
  const BevMode mode = trial % 2 == 0 ? BevMode::max : BevMode::sum;
  const std::size_t axis = static_cast<std::size_t>(trial / 2 % 3);
  const std::int64_t X = 5, Y = 4, Z = 6;
  DenseGrid t({X, Y, Z}, 1);
  // Distinct values spaced well beyond the probe step keep the argmax fixed.
  std::vector<double> vals(t.size());
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.01 * static_cast<double>(i);
  std::shuffle(vals.begin(), vals.end(), rng);
  t.values() = vals;
  const DenseGrid ref = bev_flatten(t, mode, axis);
  std::vector<std::int64_t> out_dims;
  for (std::size_t d : ref.dims()) out_dims.push_back(static_cast<std::int64_t>(d));
  const DenseGrid w = random_grid(rng, out_dims, 1, -1, 1);
  const DenseGrid a = bev_flatten_grad(t, mode, w, axis);
  auto f = [&](const DenseGrid& tt) { return weighted_sum(bev_flatten(tt, mode, axis), w); };
  return {{"tensor", a, numeric(f, t), {}}};
}

std::vector<Check> trial_smoothness(Rng& rng, std::uint64_t trial) {
  const Reduction red = trial % 2 == 0 ? Reduction::mean : Reduction::sum;
  const DenseGrid depth = random_grid(rng, {12, 16}, 1, 1, 10);
  const DenseGrid image = random_grid(rng, {12, 16}, 3, 0, 1);
  const GradPair gp = smoothness_loss(depth, image, red);
  auto f = [&](const DenseGrid& d) { return smoothness_loss(d, image, red).value; };
  return {{"depth", gp.grad_wrt("depth"), numeric(f, depth), {}}};
}

DenseGrid random_lidar(Rng& rng, std::int64_t H, std::int64_t W, double keep) {
  DenseGrid lidar({H, W}, 1);
  for (double& v : lidar.values()) v = uniform(rng, 0, 1) < keep ? uniform(rng, 1, 10) : 0.0;
  return lidar;
}

// Prediction at least `gap` away from every nonzero target.
DenseGrid pred_away_from(Rng& rng, const DenseGrid& target, double gap) {
  DenseGrid pred = DenseGrid::like(target);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double s = uniform(rng, 0, 1) < 0.5 ? -1.0 : 1.0;
    pred[i] = std::max(0.5, target[i] + s * uniform(rng, gap, 3.0));
    if (std::abs(pred[i] - target[i]) < gap) pred[i] = target[i] + gap + uniform(rng, 0, 1);
  }
  return pred;
}

std::vector<Check> trial_supervised_depth(Rng& rng, std::uint64_t trial) {
  const Reduction red = trial % 2 == 0 ? Reduction::mean : Reduction::sum;
  DenseGrid lidar = random_lidar(rng, 12, 16, 0.3);
  lidar[0] = 5.0;
  const DenseGrid pred = pred_away_from(rng, lidar, 0.05);
  const GradPair gp = supervised_depth_loss(pred, lidar, red);
  auto f = [&](const DenseGrid& p) { return supervised_depth_loss(p, lidar, red).value; };
  return {{"pred", gp.grad_wrt("pred"), numeric(f, pred), {}}};
}

std::vector<Check> trial_bilinear_sample(Rng& rng, std::uint64_t) {
  const std::int64_t H = 12, W = 16, C = 3;
  const DenseGrid src = random_grid(rng, {H, W}, C, 0, 1);
  DenseGrid coords({H, W}, 2);
  for (std::size_t i = 0; i < coords.pixels(); ++i) {
    coords[2 * i] = off_lattice(rng, 0.0, static_cast<double>(W - 1), 0.01);
    coords[2 * i + 1] = off_lattice(rng, 0.0, static_cast<double>(H - 1), 0.01);
  }
  const DenseGrid w = random_grid(rng, {H, W}, C, -1, 1);
  const BilinearGrad g = bilinear_sample_grad(src, coords, w);
  auto f_src = [&](const DenseGrid& s) { return weighted_sum(bilinear_sample(s, coords).image, w); };
  auto f_coords = [&](const DenseGrid& c) { return weighted_sum(bilinear_sample(src, c).image, w); };
  return {{"src", g.src, numeric(f_src, src), {}}, {"coords", g.coords, numeric(f_coords, coords), {}}};
}

std::vector<Check> trial_reproject(Rng& rng, std::uint64_t) {
  const std::int64_t H = 12, W = 16;
  const CameraIntrinsics cam = small_camera(rng, H, W);
  const PoseSE3 pose = random_pose(rng, 0.1, 1.0);
  const DenseGrid depth = random_grid(rng, {H, W}, 1, 3, 20);
  const DenseGrid w = random_grid(rng, {H, W}, 2, -1, 1);
  const DenseGrid g = reproject_coords_grad(depth, pose, cam);
  DenseGrid a = DenseGrid::like(depth);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = w[2 * i] * g[2 * i] + w[2 * i + 1] * g[2 * i + 1];
  auto f = [&](const DenseGrid& d) { return weighted_sum(reproject_coords(d, pose, cam), w); };
  return {{"depth", a, numeric(f, depth), {}}};
}

SsimConfig random_ssim(Rng& rng, std::uint64_t trial) {
  SsimConfig cfg;
  cfg.window = trial % 2 == 0 ? 3 : 5;
  cfg.c1 *= uniform(rng, 0.5, 2.0);
  cfg.c2 *= uniform(rng, 0.5, 2.0);
  return cfg;
}

std::vector<Check> trial_ssim(Rng& rng, std::uint64_t trial) {
  const SsimConfig cfg = random_ssim(rng, trial);
  const DenseGrid a = random_grid(rng, {12, 16}, 3, 0, 1);
  const DenseGrid b = random_grid(rng, {12, 16}, 3, 0, 1);
  const DenseGrid w = random_grid(rng, {12, 16}, 1, -1, 1);
  auto f = [&](const DenseGrid& aa) { return weighted_sum(ssim(aa, b, cfg), w); };
  return {{"a", ssim_grad(a, b, cfg, w), numeric(f, a), {}}};
}

// b differs from a by at least `gap` in every channel.
DenseGrid image_away_from(Rng& rng, const DenseGrid& a, double gap) {
  DenseGrid b = DenseGrid::like(a);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double s = uniform(rng, 0, 1) < 0.5 ? -1.0 : 1.0;
    b[i] = a[i] + s * uniform(rng, gap, 0.5);
  }
  return b;
}

std::vector<Check> trial_photometric_error(Rng& rng, std::uint64_t trial) {
  const SsimConfig cfg = random_ssim(rng, trial);
  const double alpha = uniform(rng, 0.0, 1.0);
  const DenseGrid a = random_grid(rng, {12, 16}, 3, 0, 1);
  const DenseGrid b = image_away_from(rng, a, 0.02);
  DenseGrid mask({12, 16}, 1, 1.0);
  for (double& m : mask.values()) m = uniform(rng, 0, 1) < 0.8 ? 1.0 : 0.0;
  mask[0] = 1.0;
  const GradPair gp = photometric_error(a, b, alpha, cfg, &mask);
  auto fa = [&](const DenseGrid& x) { return photometric_error(x, b, alpha, cfg, &mask).value; };
  auto fb = [&](const DenseGrid& x) { return photometric_error(a, x, alpha, cfg, &mask).value; };
  return {{"a", gp.grad_wrt("a"), numeric(fa, a), {}}, {"b", gp.grad_wrt("b"), numeric(fb, b), {}}};
}

// Smooth random texture so the warped images have usable gradients.
DenseGrid texture(Rng& rng, std::int64_t H, std::int64_t W) {
  const std::uint64_t s = rng();
  DenseGrid img({H, W}, 3);
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      for (std::int64_t c = 0; c < 3; ++c) {
        img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), static_cast<std::size_t>(c)) =
            scene_texture(s, c, static_cast<double>(x), static_cast<double>(y)) +
            0.05 * uniform(rng, -1, 1);
      }
    }
  }
  return img;
}

std::vector<Check> trial_self_supervised(Rng& rng, std::uint64_t trial) {
  const std::int64_t H = 12, W = 16;
  const CameraIntrinsics cam = small_camera(rng, H, W);
  const double b = uniform(rng, 0.3, 1.0);
  const PoseSE3 to_prev = PoseSE3::translation(Vec3(b, uniform(rng, -0.1, 0.1), 0.0));
  const PoseSE3 to_next = PoseSE3::translation(Vec3(-b, uniform(rng, -0.1, 0.1), 0.0));
  const DenseGrid it = texture(rng, H, W);
  const DenseGrid ip = texture(rng, H, W);
  const DenseGrid in = texture(rng, H, W);
  const DenseGrid depth = random_grid(rng, {H, W}, 1, 5, 15);
  PhotometricConfig pc;
  pc.alpha = uniform(rng, 0.5, 1.0);
  pc.combine = trial % 2 == 0 ? ViewCombine::min : ViewCombine::mean;
  const GradPair gp = self_supervised_loss(it, ip, in, depth, to_prev, to_next, cam, pc);
  auto f = [&](const DenseGrid& d) {
    return self_supervised_loss(it, ip, in, d, to_prev, to_next, cam, pc).value;
  };
  return {{"depth", gp.grad_wrt("depth"), numeric(f, depth),
           smooth_region(depth, {to_prev, to_next}, cam, 0.02)}};
}

std::vector<Check> trial_combined_md(Rng& rng, std::uint64_t) {
  const DenseGrid lm = random_grid(rng, {12, 16}, 1, 0, 1);
  const DenseGrid ld = random_grid(rng, {12, 16}, 1, 0, 2);
  DenseGrid lidar = random_lidar(rng, 12, 16, 0.125);
  MdWeights w;
  w.lambda_m = uniform(rng, 0.1, 2.0);
  w.lambda_d = uniform(rng, 0.1, 2.0);
  const GradPair gp = combined_md_loss(lm, ld, lidar, w);
  auto fm = [&](const DenseGrid& x) { return combined_md_loss(x, ld, lidar, w).value; };
  auto fd = [&](const DenseGrid& x) { return combined_md_loss(lm, x, lidar, w).value; };
  return {{"l_m", gp.grad_wrt("l_m"), numeric(fm, lm), {}},
          {"l_d", gp.grad_wrt("l_d"), numeric(fd, ld), {}}};
}

std::vector<Check> trial_focal(Rng& rng, std::uint64_t) {
  const DenseGrid p = random_grid(rng, {12, 16}, 1, 0.02, 0.98);
  DenseGrid y = DenseGrid::like(p);
  for (double& v : y.values()) v = uniform(rng, 0, 1) < 0.3 ? 1.0 : 0.0;
  const double alpha = uniform(rng, 0.1, 0.9);
  const double gamma = uniform(rng, 0.0, 3.0);
  const GradPair gp = focal_loss(p, y, alpha, gamma);
  auto f = [&](const DenseGrid& x) { return focal_loss(x, y, alpha, gamma).value; };
  return {{"p", gp.grad_wrt("p"), numeric(f, p), {}}};
}

std::vector<Check> trial_smooth_l1(Rng& rng, std::uint64_t) {
  const double beta = uniform(rng, 0.05, 1.0);
  const DenseGrid target = random_grid(rng, {12, 16}, 1, -2, 2);
  DenseGrid pred = DenseGrid::like(target);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    // Keep |pred - target| clear of 0 and beta.
    double d = 0.0;
    do {
      d = uniform(rng, -3.0 * beta, 3.0 * beta);
    } while (std::abs(d) < 0.01 * beta || std::abs(std::abs(d) - beta) < 0.01 * beta);
    pred[i] = target[i] + d;
  }
  const GradPair gp = smooth_l1(pred, target, beta);
  auto f = [&](const DenseGrid& x) { return smooth_l1(x, target, beta).value; };
  return {{"pred", gp.grad_wrt("pred"), numeric(f, pred), {}}};
}

DenseGrid crop_rows(const DenseGrid& g, std::size_t y0, std::size_t rows) {
  DenseGrid out({static_cast<std::int64_t>(rows), static_cast<std::int64_t>(g.width())},
                static_cast<std::int64_t>(g.channels()));
  const std::size_t row_len = g.width() * g.channels();
  std::copy_n(g.values().begin() + static_cast<std::ptrdiff_t>(y0 * row_len), rows * row_len,
              out.values().begin());
  return out;
}

// Scenes have a 16-pixel minimum; render 16 x W and keep the middle H rows
// with the principal point shifted to match.
SyntheticScene cropped_scene(std::uint64_t seed, std::int64_t H, std::int64_t W) {
  const std::int64_t full = 16;
  SyntheticScene s =
      make_scene(SceneKind::textured_random, full, W, default_camera(full, W), 1.0, seed);
  const auto y0 = static_cast<std::size_t>((full - H) / 2);
  const auto rows = static_cast<std::size_t>(H);
  s.image_t = crop_rows(s.image_t, y0, rows);
  s.image_prev = crop_rows(s.image_prev, y0, rows);
  s.image_next = crop_rows(s.image_next, y0, rows);
  s.gt_depth = crop_rows(s.gt_depth, y0, rows);
  s.lidar = crop_rows(s.lidar, y0, rows);
  s.cam.height = H;
  s.cam.cy -= static_cast<double>(y0);
  return s;
}

std::vector<Check> trial_fit_objective(Rng& rng, std::uint64_t trial) {
  const std::int64_t H = 12, W = 16;
  const SyntheticScene scene = cropped_scene(rng(), H, W);
  const CameraIntrinsics& cam = scene.cam;
  FitConfig fit;
  fit.mode = std::array{SupervisionMode::M, SupervisionMode::D, SupervisionMode::MD}[trial % 3];
  fit.smoothness_weight = uniform(rng, 0.0, 0.1);
  fit.photometric.combine = trial % 2 == 0 ? ViewCombine::min : ViewCombine::mean;
  DenseGrid depth = DenseGrid::like(scene.gt_depth);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const double s = uniform(rng, 0, 1) < 0.5 ? -1.0 : 1.0;
    depth[i] = scene.gt_depth[i] * (1.0 + s * uniform(rng, 0.02, 0.2));
  }
  const ObjectiveValue obj = fit_objective(scene, depth, fit);
  auto f = [&](const DenseGrid& d) { return fit_objective(scene, d, fit).total; };
  DenseGrid include;
  if (fit.mode != SupervisionMode::D) {
    include = smooth_region(depth, {scene.pose_to_prev, scene.pose_to_next}, cam, 0.02);
  }
  return {{"depth", obj.grad_depth, numeric(f, depth), include}};
}

struct OpEntry {
  std::string name;
  TrialFn fn;
};

const std::vector<OpEntry>& registry() {
  static const std::vector<OpEntry> ops = {
      {"depth_param", trial_depth_param},
      {"backproject", trial_backproject},
      {"soft_quantize", trial_soft_quantize},
      {"bev_flatten", trial_bev_flatten},
      {"smoothness", trial_smoothness},
      {"supervised_depth", trial_supervised_depth},
      {"bilinear_sample", trial_bilinear_sample},
      {"reproject", trial_reproject},
      {"ssim", trial_ssim},
      {"photometric_error", trial_photometric_error},
      {"self_supervised", trial_self_supervised},
      {"combined_md", trial_combined_md},
      {"focal", trial_focal},
      {"smooth_l1", trial_smooth_l1},
      {"fit_objective", trial_fit_objective},
  };
  return ops;
}

}  // namespace

const std::vector<std::string>& gradcheck_op_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const OpEntry& e : registry()) out.push_back(e.name);
    return out;
  }();
  return names;
}

GradcheckResult run_gradcheck(std::string_view op, std::uint64_t seed, std::size_t trials) {
  const auto& ops = registry();
  const auto it = std::find_if(ops.begin(), ops.end(), [&](const OpEntry& e) { return e.name == op; });
  if (it == ops.end()) {
    std::string valid;
    for (const OpEntry& e : ops) valid += (valid.empty() ? "" : ", ") + e.name;
    throw Error(ErrorCode::InvalidConfig,
                "unknown gradcheck op '" + std::string(op) + "'; valid ops: " + valid);
  }
  GradcheckResult result;
  result.op = it->name;
  result.trials = trials;
  bool first = true;
  for (std::size_t t = 0; t < trials; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(t),
                      static_cast<std::uint32_t>(it - ops.begin())};
    Rng rng(seq);
    bool trial_ok = true;
    for (const Check& c : it->fn(rng, t)) {
      const GradCheckReport rep =
          grad_check(c.analytic, c.numeric, kGradcheckRelTol, kGradcheckAbsTol,
                     c.include.empty() ? nullptr : &c.include);
      result.elements_checked += rep.checked;
      trial_ok = trial_ok && rep.passed;
      if (first || rep.worst_ratio > result.worst.report.worst_ratio) {
        result.worst = {t, c.wrt, rep};
        first = false;
      }
    }
    if (!trial_ok) ++result.failed_trials;
  }
  return result;
}

}  // namespace plk
