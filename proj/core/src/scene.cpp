#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plk/error.hpp"
#include "plk/optim_fit.hpp"
#include "plk/parallel.hpp"

namespace plk {

std::string_view to_string(SceneKind k) {
  switch (k) {
    case SceneKind::plane: return "plane";
    case SceneKind::two_planes: return "two_planes";
    case SceneKind::textured_random: return "textured_random";
  }
  return "plane";
}

SceneKind scene_kind_from_string(std::string_view s) {
  if (s == "plane") return SceneKind::plane;
  if (s == "two_planes") return SceneKind::two_planes;
  if (s == "textured_random") return SceneKind::textured_random;
  throw Error(ErrorCode::InvalidConfig,
              "scene kind must be plane, two_planes or textured_random, got '" + std::string(s) + "'");
}

CameraIntrinsics default_camera(std::int64_t height, std::int64_t width) {
  CameraIntrinsics cam;
  cam.width = width;
  cam.height = height;
  cam.f = 0.625 * static_cast<double>(width);
  cam.cx = 0.5 * static_cast<double>(width - 1);
  cam.cy = 0.5 * static_cast<double>(height - 1);
  return cam;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Wave {
  double kx, ky, phase, amplitude;

  double operator()(double u, double v) const {
    return amplitude * std::sin(kx * u + ky * v + phase);
  }
};

// Sum of oriented sinusoids with wavelengths in [min_len, max_len] pixels.
std::vector<Wave> make_waves(std::mt19937_64& rng, int count, double min_len, double max_len,
                             double amplitude, double max_angle) {
  std::uniform_real_distribution<double> angle(-max_angle, max_angle);
  std::uniform_real_distribution<double> length(min_len, max_len);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::vector<Wave> waves;
  for (int i = 0; i < count; ++i) {
    const double th = angle(rng);
    const double k = kTwoPi / length(rng);
    waves.push_back({k * std::cos(th), k * std::sin(th), phase(rng), amplitude});
  }
  return waves;
}

class Texture {
 public:
  Texture(std::uint64_t seed, std::int64_t channels) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::int64_t c = 0; c < channels; ++c) {
      per_channel_.push_back(make_waves(rng, 4, 14.0, 32.0, 0.1, std::numbers::pi / 3.0));
    }
  }

  double operator()(std::int64_t c, double u, double v) const {
    double s = 0.5;
    for (const Wave& w : per_channel_[static_cast<std::size_t>(c)]) s += w(u, v);
    return s;
  }

 private:
  std::vector<std::vector<Wave>> per_channel_;
};

// Smooth depth field over the reference image plane, log-uniform in [lo, hi].
class DepthField {
 public:
  DepthField(std::uint64_t seed, double lo, double hi) : lo_(lo), ratio_(hi / lo) {
    std::mt19937_64 rng(seed ^ 0x2545f4914f6cdd1dULL);
    waves_ = make_waves(rng, 3, 56.0, 112.0, 1.0 / 6.0, std::numbers::pi);
  }

  double operator()(double u, double v) const {
    double s = 0.5;
    for (const Wave& w : waves_) s += w(u, v);
    return lo_ * std::pow(ratio_, s);
  }

 private:
  double lo_;
  double ratio_;
  std::vector<Wave> waves_;
};

struct Hit {
  double u = 0.0;  // reference-image coordinates of the surface point
  double v = 0.0;
  bool ok = false;
};

class SceneGeometry {
 public:
  SceneGeometry(const SceneOptions& o) : opts_(o), field_(o.seed, o.random_min_depth, o.random_max_depth) {}

  double depth_at(double u, double v) const {
    switch (opts_.kind) {
      case SceneKind::plane: return opts_.plane_depth;
      case SceneKind::two_planes: return u < boundary() ? opts_.plane_depth : opts_.far_depth;
      case SceneKind::textured_random: return field_(u, v);
    }
    return opts_.plane_depth;
  }

  // Surface point seen through pixel q of a camera at pose_t_to_n.
  Hit trace(const PoseSE3& pose, double qu, double qv) const {
    if (opts_.kind == SceneKind::textured_random) return solve_field(pose, qu, qv);
    const CameraIntrinsics& cam = opts_.cam;
    const Vec3 centre = -(pose.R.transpose() * pose.t);
    const Vec3 dir = pose.R.transpose() * Vec3((qu - cam.cx) / cam.f, (qv - cam.cy) / cam.f, 1.0);
    auto hit_plane = [&](double z, Hit& h) {
      if (dir.z() == 0.0) return false;
      const double lambda = (z - centre.z()) / dir.z();
      if (!(lambda > 0.0)) return false;
      const Vec3 x = centre + lambda * dir;
      h.u = cam.f * x.x() / x.z() + cam.cx;
      h.v = cam.f * x.y() / x.z() + cam.cy;
      h.ok = true;
      return true;
    };
    Hit h;
    if (opts_.kind == SceneKind::two_planes) {
      // Near half-plane covers reference columns left of the boundary; the
      // far plane is unbounded behind it.
      if (hit_plane(opts_.plane_depth, h) && h.u < boundary()) return h;
      h = Hit{};
      hit_plane(opts_.far_depth, h);
      return h;
    }
    hit_plane(opts_.plane_depth, h);
    return h;
  }

 private:
  double boundary() const { return 0.5 * static_cast<double>(opts_.width) - 0.5; }

  Eigen::Vector2d project_reference(const PoseSE3& pose, double a, double b) const {
    const CameraIntrinsics& cam = opts_.cam;
    const double z = field_(a, b);
    const Vec3 x((a - cam.cx) * z / cam.f, (b - cam.cy) * z / cam.f, z);
    const Vec3 xn = pose.R * x + pose.t;
    return {cam.f * xn.x() / xn.z() + cam.cx, cam.f * xn.y() / xn.z() + cam.cy};
  }

  // Newton iteration for the reference coordinate that projects onto q.
  Hit solve_field(const PoseSE3& pose, double qu, double qv) const {
    const Eigen::Vector2d q(qu, qv);
    Eigen::Vector2d ab = q;
    constexpr double h = 1e-6;
    for (int it = 0; it < 50; ++it) {
      const Eigen::Vector2d r = project_reference(pose, ab.x(), ab.y()) - q;
      if (r.norm() < 1e-12) break;
      Eigen::Matrix2d J;
      J.col(0) = (project_reference(pose, ab.x() + h, ab.y()) -
                  project_reference(pose, ab.x() - h, ab.y())) / (2.0 * h);
      J.col(1) = (project_reference(pose, ab.x(), ab.y() + h) -
                  project_reference(pose, ab.x(), ab.y() - h)) / (2.0 * h);
      ab -= J.partialPivLu().solve(r);
    }
    return {ab.x(), ab.y(), ab.allFinite()};
  }

  SceneOptions opts_;
  DepthField field_;
};

DenseGrid render(const SceneGeometry& geo, const Texture& tex, const SceneOptions& o,
                 const PoseSE3& pose) {
  DenseGrid img({o.height, o.width}, o.channels, 0.0);
  const auto W = static_cast<std::size_t>(o.width);
  const auto C = static_cast<std::size_t>(o.channels);
  parallel_for(img.pixels(), [&](std::size_t p) {
    const Hit h = geo.trace(pose, static_cast<double>(p % W), static_cast<double>(p / W));
    if (!h.ok) return;
    for (std::size_t c = 0; c < C; ++c) {
      img[p * C + c] = tex(static_cast<std::int64_t>(c), h.u, h.v);
    }
  }, 64);
  return img;
}

}  // namespace

double scene_texture(std::uint64_t seed, std::int64_t channel, double u, double v) {
  return Texture(seed, channel + 1)(channel, u, v);
}

SyntheticScene make_scene(const SceneOptions& o) {
  if (o.height < 16 || o.width < 16) {
    throw Error(ErrorCode::InvalidShape, "make_scene: height and width must be >= 16");
  }
  if (o.channels < 1) throw Error(ErrorCode::InvalidShape, "make_scene: channels must be >= 1");
  if (o.baseline == 0.0 || !std::isfinite(o.baseline)) {
    throw Error(ErrorCode::InvalidConfig, "make_scene: baseline must be non-zero");
  }
  if (o.cam.width != o.width || o.cam.height != o.height) {
    throw Error(ErrorCode::InvalidShape, "make_scene: camera extents differ from the scene size");
  }
  o.cam.validate();
  if (o.lidar_step_u < 1 || o.lidar_step_v < 1) {
    throw Error(ErrorCode::InvalidConfig, "make_scene: lidar lattice steps must be >= 1");
  }
  if (!(o.plane_depth > 0.0) || !(o.far_depth > 0.0) || !(o.random_min_depth > 0.0) ||
      !(o.random_max_depth > o.random_min_depth)) {
    throw Error(ErrorCode::InvalidConfig, "make_scene: depths must be positive and ordered");
  }

  SyntheticScene s;
  s.kind = o.kind;
  s.cam = o.cam;
  s.seed = o.seed;
  s.pose_to_prev = PoseSE3::translation(Vec3(o.baseline, 0.0, 0.0));
  s.pose_to_next = PoseSE3::translation(Vec3(-o.baseline, 0.0, 0.0));

  const SceneGeometry geo(o);
  const Texture tex(o.seed, o.channels);
  s.image_t = render(geo, tex, o, PoseSE3::identity());
  s.image_prev = render(geo, tex, o, s.pose_to_prev);
  s.image_next = render(geo, tex, o, s.pose_to_next);

  s.gt_depth = DenseGrid({o.height, o.width}, 1, 0.0);
  s.lidar = DenseGrid({o.height, o.width}, 1, 0.0);
  for (std::int64_t v = 0; v < o.height; ++v) {
    for (std::int64_t u = 0; u < o.width; ++u) {
      const auto p = static_cast<std::size_t>(v * o.width + u);
      s.gt_depth[p] = geo.depth_at(static_cast<double>(u), static_cast<double>(v));
      if (u % o.lidar_step_u == 0 && v % o.lidar_step_v == 0) s.lidar[p] = s.gt_depth[p];
    }
  }
  return s;
}

SyntheticScene make_scene(SceneKind kind, std::int64_t height, std::int64_t width,
                          const CameraIntrinsics& cam, double baseline, std::uint64_t seed) {
  SceneOptions o;
  o.kind = kind;
  o.height = height;
  o.width = width;
  o.cam = cam;
  o.baseline = baseline;
  o.seed = seed;
  return make_scene(o);
}

}  // namespace plk
