#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "plk/camera.hpp"
#include "plk/depth_param.hpp"
#include "plk/losses.hpp"
#include "plk/optim_fit.hpp"
#include "plk/photometric.hpp"
#include "plk/soft_quant.hpp"

namespace plk {

/// Everything a CLI run can be configured with. JSON sections mirror the
/// structs by field name:
///
///   depth_param  {sigma_min, sigma_max, d_prior}
///   camera       {f, cx, cy, width, height}
///   voxel_grid   {origin[3], bin_size[3], bins[3], sigma, neighborhood}
///   ssim         {c1, c2, window}
///   photometric  {alpha, combine}
///   md_weights   {lambda_m, lambda_d}
///   fit          {mode, steps, learning_rate, smoothness_weight, adam_betas[2],
///                 adam_eps, seed, init_jitter, sigmoid_reparam, supervised_reduction}
///   scene        {height, width, baseline, seed, channels, plane_depth, far_depth,
///                 random_min_depth, random_max_depth, lidar_step_u, lidar_step_v}
///   depth_window {min_depth, max_depth}
///
/// Unknown keys are rejected; missing keys keep their defaults.
struct RunConfig {
  DepthParamConfig depth_param;
  std::optional<CameraIntrinsics> camera;
  std::optional<VoxelGridSpec> voxel_grid;
  PhotometricConfig photometric;
  MdWeights md_weights;
  FitConfig fit;
  SceneOptions scene;
  DepthWindow depth_window;

  /// Camera from the config, or default_camera() for the scene size.
  CameraIntrinsics camera_or_default() const;
};

RunConfig parse_run_config(std::string_view text, std::string_view source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& cfg);

/// Standalone camera file: {f, cx, cy, width, height}.
CameraIntrinsics parse_camera(std::string_view text, std::string_view source = "<camera>");
CameraIntrinsics load_camera(const std::filesystem::path& path);
std::string camera_to_json(const CameraIntrinsics& cam);

/// Standalone grid file; sigma defaults to the mean bin edge.
VoxelGridSpec parse_grid_spec(std::string_view text, std::string_view source = "<grid>");
VoxelGridSpec load_grid_spec(const std::filesystem::path& path);
std::string grid_spec_to_json(const VoxelGridSpec& spec);

std::string depth_metrics_to_json(const DepthMetrics& m, double median_abs_rel);

}  // namespace plk
