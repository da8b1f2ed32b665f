#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "plk/grid.hpp"

namespace plk {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole camera with a single focal length (pixels) and principal point.
struct CameraIntrinsics {
  double f = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  std::int64_t width = 1;
  std::int64_t height = 1;

  /// Throws InvalidConfig unless f > 0, 0 <= cx < width, 0 <= cy < height.
  void validate() const;
  /// [[f, 0, cx], [0, f, cy], [0, 0, 1]]
  Mat3 K() const;
};

/// Rigid motion x -> R x + t. R must be orthonormal with det +1.
struct PoseSE3 {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static PoseSE3 identity() { return {}; }
  static PoseSE3 translation(const Vec3& t);
  /// Rotation of `angle` radians about `axis` followed by translation t.
  static PoseSE3 from_axis_angle(const Vec3& axis, double angle, const Vec3& t = Vec3::Zero());

  /// Throws InvalidPose if R^T R != I or det(R) != 1 (tolerance 1e-9).
  void validate() const;
};

PoseSE3 pose_compose(const PoseSE3& a, const PoseSE3& b);
PoseSE3 pose_inverse(const PoseSE3& a);
Vec3 pose_apply(const PoseSE3& a, const Vec3& p);

struct PixelCoord {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Pseudo-LiDAR cloud in the camera frame. source_pixels[i] is the pixel
/// that generated points[i].
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<PixelCoord> source_pixels;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

struct DepthWindow {
  double min_depth = 0.1;
  double max_depth = 100.0;
};

/// Lifts every pixel with min_depth <= d <= max_depth to
/// (x, y, z) = ((u - cx) d / f, (v - cy) d / f, d), in row-major pixel order.
PointCloud backproject(const DenseGrid& depth, const CameraIntrinsics& cam,
                       double min_depth = 0.1, double max_depth = 100.0);

/// d(point)/d(depth of its source pixel) = ((u - cx)/f, (v - cy)/f, 1).
/// The point depends on no other pixel.
Vec3 backproject_grad(const PointCloud& cloud, const CameraIntrinsics& cam,
                      std::size_t point_index);

/// Pulls per-point gradients back onto the depth map (H x W, zero where no
/// point was emitted).
DenseGrid backproject_vjp(const PointCloud& cloud, const CameraIntrinsics& cam,
                          const std::vector<Vec3>& point_grads);

struct ImagePoint {
  double u = 0.0;
  double v = 0.0;
};

/// u = f x / z + cx, v = f y / z + cy. Throws BehindCamera when z <= 0.
ImagePoint project(const Vec3& p, const CameraIntrinsics& cam);

}  // namespace plk
