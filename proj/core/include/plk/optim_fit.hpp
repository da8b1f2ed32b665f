#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "plk/camera.hpp"
#include "plk/depth_param.hpp"
#include "plk/grid.hpp"
#include "plk/losses.hpp"
#include "plk/photometric.hpp"

namespace plk {

enum class SceneKind { plane, two_planes, textured_random };

std::string_view to_string(SceneKind k);
SceneKind scene_kind_from_string(std::string_view s);

/// Three frames of a static textured scene seen by a laterally moving
/// camera, with ground-truth depth for the centre frame.
struct SyntheticScene {
  SceneKind kind = SceneKind::plane;
  DenseGrid image_t;
  DenseGrid image_prev;
  DenseGrid image_next;
  DenseGrid gt_depth;
  DenseGrid lidar;  // gt on a sparse lattice, 0 elsewhere
  PoseSE3 pose_to_prev;
  PoseSE3 pose_to_next;
  CameraIntrinsics cam;
  std::uint64_t seed = 0;
};

struct SceneOptions {
  SceneKind kind = SceneKind::plane;
  std::int64_t height = 48;
  std::int64_t width = 64;
  CameraIntrinsics cam;
  double baseline = 1.0;
  std::uint64_t seed = 0;
  std::int64_t channels = 3;
  double plane_depth = 10.0;  // plane depth; near depth for two_planes
  double far_depth = 20.0;    // two_planes only
  double random_min_depth = 4.0;
  double random_max_depth = 40.0;
  std::int64_t lidar_step_u = 4;  // lattice spacing; (4, 2) keeps 1 pixel in 8
  std::int64_t lidar_step_v = 2;
};

/// f = 0.625 W, principal point at the image centre.
CameraIntrinsics default_camera(std::int64_t height, std::int64_t width);

SyntheticScene make_scene(const SceneOptions& opts);
SyntheticScene make_scene(SceneKind kind, std::int64_t height, std::int64_t width,
                          const CameraIntrinsics& cam, double baseline, std::uint64_t seed);

/// Colour of the scene texture at a continuous reference-image coordinate.
/// Smooth, seeded, values in [0.05, 0.95].
double scene_texture(std::uint64_t seed, std::int64_t channel, double u, double v);

enum class SupervisionMode { M, D, MD };

std::string_view to_string(SupervisionMode m);
SupervisionMode supervision_mode_from_string(std::string_view s);

struct FitConfig {
  SupervisionMode mode = SupervisionMode::M;
  std::int64_t steps = 500;
  double learning_rate = 1e-2;
  double smoothness_weight = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  /// Uniform noise of this half-width added to the initial disparity.
  double init_jitter = 0.0;
  /// Optimize z with x = (1 - 1e-6) sigmoid(z) instead of clamping x.
  bool sigmoid_reparam = false;
  PhotometricConfig photometric;
  MdWeights md_weights;
  Reduction supervised_reduction = Reduction::mean;

  void validate() const;
};

inline constexpr double kMaxDisparity = 1.0 - 1e-6;

struct ObjectiveValue {
  double total = 0.0;
  double data = 0.0;
  double smoothness = 0.0;
  DenseGrid grad_depth;
};

/// Mode-selected data loss plus smoothness_weight * smoothness for a depth
/// map of the scene, with its gradient with respect to depth.
ObjectiveValue fit_objective(const SyntheticScene& scene, const DenseGrid& depth,
                             const FitConfig& fit);

struct FitResult {
  DenseGrid disparity;
  DenseGrid depth;
  std::vector<double> loss_trace;  // objective before each update
  DepthMetrics metrics;
  double median_abs_rel = 0.0;
};

/// Disparity that maps to the midpoint of the reachable depth range.
double initial_disparity(const DepthParamConfig& cfg);

/// Adam on the per-pixel disparity grid, every loss reached through the
/// disparity -> depth map. Throws DivergedFit (with the iteration) on a
/// non-finite objective and EmptyGroundTruth for D / MD without LiDAR.
FitResult fit_depth(const SyntheticScene& scene, const DepthParamConfig& depth_cfg,
                    const FitConfig& fit);

/// Median over LiDAR pixels of lidar / pred: the factor that rescales
/// d_prior onto the supervision.
double calibrate_prior(const DenseGrid& pred_depth, const DenseGrid& lidar);

/// Median of |pred - gt| / gt over gt > 0.
double median_abs_rel(const DenseGrid& pred, const DenseGrid& gt);

}  // namespace plk
