#include "plk/config.hpp"

#include <array>
#include <vector>

#include "json_util.hpp"
#include "plk/io.hpp"

namespace plk {

using detail::get_or;
using detail::json;
using detail::reject_unknown_keys;
using detail::require_object;

namespace {

Vec3 vec3_or(const json& obj, std::string_view key, const Vec3& fallback, std::string_view src) {
  const auto v = get_or<std::vector<double>>(obj, key, {fallback.x(), fallback.y(), fallback.z()}, src);
  if (v.size() != 3) {
    throw Error(ErrorCode::ParseError,
                std::string(src) + ": key '" + std::string(key) + "' needs 3 numbers");
  }
  return {v[0], v[1], v[2]};
}

CameraIntrinsics camera_from(const json& j, std::string_view src, CameraIntrinsics cam) {
  require_object(j, src, "camera");
  reject_unknown_keys(j, {"f", "cx", "cy", "width", "height"}, src, "camera");
  cam.f = get_or(j, "f", cam.f, src);
  cam.cx = get_or(j, "cx", cam.cx, src);
  cam.cy = get_or(j, "cy", cam.cy, src);
  cam.width = get_or(j, "width", cam.width, src);
  cam.height = get_or(j, "height", cam.height, src);
  cam.validate();
  return cam;
}

json camera_json(const CameraIntrinsics& cam) {
  return {{"f", cam.f}, {"cx", cam.cx}, {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height}};
}

VoxelGridSpec grid_from(const json& j, std::string_view src) {
  require_object(j, src, "voxel_grid");
  reject_unknown_keys(j, {"origin", "bin_size", "bins", "sigma", "neighborhood"}, src, "voxel_grid");
  VoxelGridSpec spec;
  spec.origin = vec3_or(j, "origin", spec.origin, src);
  spec.bin_size = vec3_or(j, "bin_size", spec.bin_size, src);
  const auto bins = get_or<std::vector<std::int64_t>>(j, "bins", {1, 1, 1}, src);
  if (bins.size() != 3) {
    throw Error(ErrorCode::ParseError, std::string(src) + ": key 'bins' needs 3 integers");
  }
  spec.bins = {bins[0], bins[1], bins[2]};
  spec.sigma = get_or(j, "sigma", VoxelGridSpec::default_sigma(spec.bin_size), src);
  spec.neighborhood = neighborhood_from_string(
      get_or<std::string>(j, "neighborhood", std::string(to_string(spec.neighborhood)), src));
  spec.validate();
  return spec;
}

json grid_json(const VoxelGridSpec& s) {
  return {{"origin", {s.origin.x(), s.origin.y(), s.origin.z()}},
          {"bin_size", {s.bin_size.x(), s.bin_size.y(), s.bin_size.z()}},
          {"bins", {s.bins[0], s.bins[1], s.bins[2]}},
          {"sigma", s.sigma},
          {"neighborhood", std::string(to_string(s.neighborhood))}};
}

}  // namespace

CameraIntrinsics RunConfig::camera_or_default() const {
  return camera ? *camera : default_camera(scene.height, scene.width);
}

RunConfig parse_run_config(std::string_view text, std::string_view src) {
  const json root = detail::parse_json(text, src);
  require_object(root, src, "config");
  reject_unknown_keys(root,
                      {"depth_param", "camera", "voxel_grid", "ssim", "photometric", "md_weights",
                       "fit", "scene", "depth_window"},
                      src, "config");
  RunConfig cfg;

  if (root.contains("depth_param")) {
    const json& j = require_object(root["depth_param"], src, "depth_param");
    reject_unknown_keys(j, {"sigma_min", "sigma_max", "d_prior"}, src, "depth_param");
    cfg.depth_param.sigma_min = get_or(j, "sigma_min", cfg.depth_param.sigma_min, src);
    cfg.depth_param.sigma_max = get_or(j, "sigma_max", cfg.depth_param.sigma_max, src);
    cfg.depth_param.d_prior = get_or(j, "d_prior", cfg.depth_param.d_prior, src);
  }
  cfg.depth_param.validate();

  if (root.contains("scene")) {
    const json& j = require_object(root["scene"], src, "scene");
    reject_unknown_keys(j,
                        {"height", "width", "baseline", "seed", "channels", "plane_depth",
                         "far_depth", "random_min_depth", "random_max_depth", "lidar_step_u",
                         "lidar_step_v"},
                        src, "scene");
    SceneOptions& s = cfg.scene;
    s.height = get_or(j, "height", s.height, src);
    s.width = get_or(j, "width", s.width, src);
    s.baseline = get_or(j, "baseline", s.baseline, src);
    s.seed = get_or(j, "seed", s.seed, src);
    s.channels = get_or(j, "channels", s.channels, src);
    s.plane_depth = get_or(j, "plane_depth", s.plane_depth, src);
    s.far_depth = get_or(j, "far_depth", s.far_depth, src);
    s.random_min_depth = get_or(j, "random_min_depth", s.random_min_depth, src);
    s.random_max_depth = get_or(j, "random_max_depth", s.random_max_depth, src);
    s.lidar_step_u = get_or(j, "lidar_step_u", s.lidar_step_u, src);
    s.lidar_step_v = get_or(j, "lidar_step_v", s.lidar_step_v, src);
  }

  if (root.contains("camera")) {
    cfg.camera = camera_from(root["camera"], src, default_camera(cfg.scene.height, cfg.scene.width));
  }
  cfg.scene.cam = cfg.camera_or_default();

  if (root.contains("voxel_grid")) cfg.voxel_grid = grid_from(root["voxel_grid"], src);

  if (root.contains("ssim")) {
    const json& j = require_object(root["ssim"], src, "ssim");
    reject_unknown_keys(j, {"c1", "c2", "window"}, src, "ssim");
    SsimConfig& s = cfg.photometric.ssim;
    s.c1 = get_or(j, "c1", s.c1, src);
    s.c2 = get_or(j, "c2", s.c2, src);
    s.window = get_or(j, "window", s.window, src);
  }
  if (root.contains("photometric")) {
    const json& j = require_object(root["photometric"], src, "photometric");
    reject_unknown_keys(j, {"alpha", "combine"}, src, "photometric");
    cfg.photometric.alpha = get_or(j, "alpha", cfg.photometric.alpha, src);
    cfg.photometric.combine = view_combine_from_string(
        get_or<std::string>(j, "combine", std::string(to_string(cfg.photometric.combine)), src));
  }
  cfg.photometric.validate();

  if (root.contains("md_weights")) {
    const json& j = require_object(root["md_weights"], src, "md_weights");
    reject_unknown_keys(j, {"lambda_m", "lambda_d"}, src, "md_weights");
    cfg.md_weights.lambda_m = get_or(j, "lambda_m", cfg.md_weights.lambda_m, src);
    cfg.md_weights.lambda_d = get_or(j, "lambda_d", cfg.md_weights.lambda_d, src);
  }
  cfg.md_weights.validate();

  if (root.contains("fit")) {
    const json& j = require_object(root["fit"], src, "fit");
    reject_unknown_keys(j,
                        {"mode", "steps", "learning_rate", "smoothness_weight", "adam_betas",
                         "adam_eps", "seed", "init_jitter", "sigmoid_reparam",
                         "supervised_reduction"},
                        src, "fit");
    FitConfig& f = cfg.fit;
    f.mode = supervision_mode_from_string(
        get_or<std::string>(j, "mode", std::string(to_string(f.mode)), src));
    f.steps = get_or(j, "steps", f.steps, src);
    f.learning_rate = get_or(j, "learning_rate", f.learning_rate, src);
    f.smoothness_weight = get_or(j, "smoothness_weight", f.smoothness_weight, src);
    const auto betas =
        get_or<std::vector<double>>(j, "adam_betas", {f.adam_beta1, f.adam_beta2}, src);
    if (betas.size() != 2) {
      throw Error(ErrorCode::ParseError, std::string(src) + ": key 'adam_betas' needs 2 numbers");
    }
    f.adam_beta1 = betas[0];
    f.adam_beta2 = betas[1];
    f.adam_eps = get_or(j, "adam_eps", f.adam_eps, src);
    f.seed = get_or(j, "seed", f.seed, src);
    f.init_jitter = get_or(j, "init_jitter", f.init_jitter, src);
    f.sigmoid_reparam = get_or(j, "sigmoid_reparam", f.sigmoid_reparam, src);
    f.supervised_reduction = reduction_from_string(get_or<std::string>(
        j, "supervised_reduction", std::string(to_string(f.supervised_reduction)), src));
  }
  cfg.fit.photometric = cfg.photometric;
  cfg.fit.md_weights = cfg.md_weights;
  cfg.fit.validate();

  if (root.contains("depth_window")) {
    const json& j = require_object(root["depth_window"], src, "depth_window");
    reject_unknown_keys(j, {"min_depth", "max_depth"}, src, "depth_window");
    cfg.depth_window.min_depth = get_or(j, "min_depth", cfg.depth_window.min_depth, src);
    cfg.depth_window.max_depth = get_or(j, "max_depth", cfg.depth_window.max_depth, src);
  }
  if (!(cfg.depth_window.min_depth > 0.0) ||
      !(cfg.depth_window.max_depth >= cfg.depth_window.min_depth)) {
    throw Error(ErrorCode::InvalidConfig, "depth_window: need 0 < min_depth <= max_depth");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(io::read_bytes(path), path.string());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["depth_param"] = {{"sigma_min", cfg.depth_param.sigma_min},
                      {"sigma_max", cfg.depth_param.sigma_max},
                      {"d_prior", cfg.depth_param.d_prior}};
  j["camera"] = camera_json(cfg.camera_or_default());
  if (cfg.voxel_grid) j["voxel_grid"] = grid_json(*cfg.voxel_grid);
  j["ssim"] = {{"c1", cfg.photometric.ssim.c1},
               {"c2", cfg.photometric.ssim.c2},
               {"window", cfg.photometric.ssim.window}};
  j["photometric"] = {{"alpha", cfg.photometric.alpha},
                      {"combine", std::string(to_string(cfg.photometric.combine))}};
  j["md_weights"] = {{"lambda_m", cfg.md_weights.lambda_m}, {"lambda_d", cfg.md_weights.lambda_d}};
  const FitConfig& f = cfg.fit;
  j["fit"] = {{"mode", std::string(to_string(f.mode))},
              {"steps", f.steps},
              {"learning_rate", f.learning_rate},
              {"smoothness_weight", f.smoothness_weight},
              {"adam_betas", {f.adam_beta1, f.adam_beta2}},
              {"adam_eps", f.adam_eps},
              {"seed", f.seed},
              {"init_jitter", f.init_jitter},
              {"sigmoid_reparam", f.sigmoid_reparam},
              {"supervised_reduction", std::string(to_string(f.supervised_reduction))}};
  const SceneOptions& s = cfg.scene;
  j["scene"] = {{"height", s.height},
                {"width", s.width},
                {"baseline", s.baseline},
                {"seed", s.seed},
                {"channels", s.channels},
                {"plane_depth", s.plane_depth},
                {"far_depth", s.far_depth},
                {"random_min_depth", s.random_min_depth},
                {"random_max_depth", s.random_max_depth},
                {"lidar_step_u", s.lidar_step_u},
                {"lidar_step_v", s.lidar_step_v}};
  j["depth_window"] = {{"min_depth", cfg.depth_window.min_depth},
                       {"max_depth", cfg.depth_window.max_depth}};
  return j.dump(2) + "\n";
}

CameraIntrinsics parse_camera(std::string_view text, std::string_view src) {
  return camera_from(detail::parse_json(text, src), src, CameraIntrinsics{});
}

CameraIntrinsics load_camera(const std::filesystem::path& path) {
  return parse_camera(io::read_bytes(path), path.string());
}

std::string camera_to_json(const CameraIntrinsics& cam) { return camera_json(cam).dump(2) + "\n"; }

VoxelGridSpec parse_grid_spec(std::string_view text, std::string_view src) {
  return grid_from(detail::parse_json(text, src), src);
}

VoxelGridSpec load_grid_spec(const std::filesystem::path& path) {
  return parse_grid_spec(io::read_bytes(path), path.string());
}

std::string grid_spec_to_json(const VoxelGridSpec& spec) { return grid_json(spec).dump(2) + "\n"; }

std::string depth_metrics_to_json(const DepthMetrics& m, double median_abs_rel) {
  json j = {{"abs_rel", m.abs_rel},   {"sq_rel", m.sq_rel}, {"rmse", m.rmse},
            {"rmse_log", m.rmse_log}, {"delta1", m.delta1}, {"delta2", m.delta2},
            {"delta3", m.delta3},     {"count", m.count},   {"median_abs_rel", median_abs_rel}};
  return j.dump(2) + "\n";
}

}  // namespace plk
