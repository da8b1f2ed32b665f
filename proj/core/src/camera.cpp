#include "plk/camera.hpp"

#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "plk/error.hpp"

namespace plk {

void CameraIntrinsics::validate() const {
  if (!(f > 0.0) || !std::isfinite(f)) {
    throw Error(ErrorCode::InvalidConfig, "camera: focal length must be > 0");
  }
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::InvalidConfig, "camera: width and height must be >= 1");
  }
  if (!(cx >= 0.0 && cx < static_cast<double>(width))) {
    throw Error(ErrorCode::InvalidConfig, "camera: cx must lie in [0, width)");
  }
  if (!(cy >= 0.0 && cy < static_cast<double>(height))) {
    throw Error(ErrorCode::InvalidConfig, "camera: cy must lie in [0, height)");
  }
}

Mat3 CameraIntrinsics::K() const {
  Mat3 k;
  k << f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0;
  return k;
}

PoseSE3 PoseSE3::translation(const Vec3& t) {
  PoseSE3 p;
  p.t = t;
  return p;
}

PoseSE3 PoseSE3::from_axis_angle(const Vec3& axis, double angle, const Vec3& t) {
  PoseSE3 p;
  p.R = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  p.t = t;
  return p;
}

void PoseSE3::validate() const {
  constexpr double kTol = 1e-9;
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!(ortho <= kTol)) {
    throw Error(ErrorCode::InvalidPose,
                "rotation is not orthonormal (max |R^T R - I| = " + std::to_string(ortho) + ")");
  }
  const double det = R.determinant();
  if (!(std::abs(det - 1.0) <= kTol)) {
    throw Error(ErrorCode::InvalidPose, "rotation determinant is " + std::to_string(det));
  }
  if (!t.allFinite()) {
    throw Error(ErrorCode::InvalidPose, "translation is not finite");
  }
}

PoseSE3 pose_compose(const PoseSE3& a, const PoseSE3& b) {
  a.validate();
  b.validate();
  PoseSE3 out;
  out.R = a.R * b.R;
  out.t = a.R * b.t + a.t;
  return out;
}

PoseSE3 pose_inverse(const PoseSE3& a) {
  a.validate();
  PoseSE3 out;
  out.R = a.R.transpose();
  out.t = -(out.R * a.t);
  return out;
}

Vec3 pose_apply(const PoseSE3& a, const Vec3& p) {
  a.validate();
  return a.R * p + a.t;
}

PointCloud backproject(const DenseGrid& depth, const CameraIntrinsics& cam, double min_depth,
                       double max_depth) {
  cam.validate();
  require_image(depth, 1, "backproject depth");
  if (depth.height() != static_cast<std::size_t>(cam.height) ||
      depth.width() != static_cast<std::size_t>(cam.width)) {
    throw Error(ErrorCode::InvalidShape, "backproject: depth " + depth.shape_string() +
                                             " does not match camera " +
                                             std::to_string(cam.height) + "x" +
                                             std::to_string(cam.width));
  }
  if (!(min_depth > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "backproject: min_depth must be > 0");
  }

  PointCloud cloud;
  const std::size_t H = depth.height();
  const std::size_t W = depth.width();
  for (std::size_t v = 0; v < H; ++v) {
    for (std::size_t u = 0; u < W; ++u) {
      const double d = depth.at(v, u);
      if (!(d >= min_depth && d <= max_depth)) continue;
      const double z = d;
      const double x = (static_cast<double>(u) - cam.cx) * z / cam.f;
      const double y = (static_cast<double>(v) - cam.cy) * z / cam.f;
      cloud.points.emplace_back(x, y, z);
      cloud.source_pixels.push_back(
          {static_cast<std::uint32_t>(u), static_cast<std::uint32_t>(v)});
    }
  }
  return cloud;
}

Vec3 backproject_grad(const PointCloud& cloud, const CameraIntrinsics& cam,
                      std::size_t point_index) {
  if (point_index >= cloud.source_pixels.size()) {
    throw Error(ErrorCode::InvalidIndex, "backproject_grad: point index out of range",
                point_index);
  }
  const PixelCoord px = cloud.source_pixels[point_index];
  return {(static_cast<double>(px.u) - cam.cx) / cam.f,
          (static_cast<double>(px.v) - cam.cy) / cam.f, 1.0};
}

DenseGrid backproject_vjp(const PointCloud& cloud, const CameraIntrinsics& cam,
                          const std::vector<Vec3>& point_grads) {
  cam.validate();
  if (point_grads.size() != cloud.size()) {
    throw Error(ErrorCode::InvalidShape, "backproject_vjp: gradient count mismatch");
  }
  DenseGrid out({cam.height, cam.width}, 1, 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const PixelCoord px = cloud.source_pixels[i];
    out.at(px.v, px.u) += backproject_grad(cloud, cam, i).dot(point_grads[i]);
  }
  return out;
}

ImagePoint project(const Vec3& p, const CameraIntrinsics& cam) {
  if (!(p.z() > 0.0)) {
    throw Error(ErrorCode::BehindCamera, "project: point has z <= 0");
  }
  return {cam.f * p.x() / p.z() + cam.cx, cam.f * p.y() / p.z() + cam.cy};
}

}  // namespace plk
