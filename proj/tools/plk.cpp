// plk: pseudo-LiDAR depth, voxelization and loss tooling.
//
// Exit codes: 0 success, 2 input/parse error, 3 shape/contract error,
// 4 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "plk/camera.hpp"
#include "plk/config.hpp"
#include "plk/error.hpp"
#include "plk/gradcheck_suite.hpp"
#include "plk/io.hpp"
#include "plk/losses.hpp"
#include "plk/optim_fit.hpp"
#include "plk/photometric.hpp"
#include "plk/soft_quant.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitContract = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(plk::ErrorCode code) {
  using plk::ErrorCode;
  switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
    case ErrorCode::InvalidConfig:
      return kExitInput;
    case ErrorCode::OracleFailure:
    case ErrorCode::DivergedFit:
      return kExitNumeric;
    default:
      return kExitContract;
  }
}

plk::RunConfig load_config(const std::string& path) {
  if (path.empty()) return plk::RunConfig{};
  return plk::load_run_config(path);
}

void print_scalar(double v) { std::cout << plk::io::format_scalar(v) << "\n"; }

int cmd_depth_to_cloud(const std::string& depth_path, const std::string& camera_path,
                       const std::string& out, const std::string& text_out,
                       std::optional<double> min_depth, std::optional<double> max_depth) {
  const plk::DenseGrid depth = plk::io::read_pfm(depth_path);
  const plk::CameraIntrinsics cam = plk::load_camera(camera_path);
  plk::require_image(depth, 1, depth_path);
  if (static_cast<std::int64_t>(depth.width()) != cam.width ||
      static_cast<std::int64_t>(depth.height()) != cam.height) {
    throw plk::Error(plk::ErrorCode::InvalidShape,
                     depth_path + ": depth " + depth.shape_string() + " does not match camera " +
                         std::to_string(cam.height) + "x" + std::to_string(cam.width));
  }
  const plk::DepthWindow win;
  const plk::PointCloud cloud = plk::backproject(depth, cam, min_depth.value_or(win.min_depth),
                                                 max_depth.value_or(win.max_depth));
  plk::io::write_plpc(out, cloud);
  if (!text_out.empty()) plk::io::write_cloud_text(text_out, cloud);
  std::cout << cloud.size() << "\n";
  return kExitOk;
}

int cmd_quantize(const std::string& cloud_path, const std::string& grid_path,
                 const std::string& out, const std::string& bev, const std::string& bev_out) {
  const plk::PointCloud cloud = plk::io::read_plpc(cloud_path);
  const plk::VoxelGridSpec spec = plk::load_grid_spec(grid_path);
  const plk::DenseGrid t = plk::soft_quantize(cloud, spec);
  plk::io::write_tns(out, t, spec);
  if (!bev.empty()) {
    const plk::BevMode mode = plk::bev_mode_from_string(bev);
    const fs::path path =
        bev_out.empty() ? fs::path(out).replace_extension(".bev.tns") : fs::path(bev_out);
    plk::io::write_tns(path, plk::bev_flatten(t, mode), spec);
  }
  std::cout << cloud.size() << "\n";
  return kExitOk;
}

int cmd_loss(const std::string& mode_str, const std::string& config_path,
             const std::string& inputs, const std::string& depth_path,
             const std::string& dump_dir) {
  const plk::SupervisionMode mode = plk::supervision_mode_from_string(mode_str);
  const plk::RunConfig cfg = load_config(config_path);
  const plk::SyntheticScene scene = plk::io::read_scene_dir(inputs);
  const plk::DenseGrid depth =
      depth_path.empty() ? scene.gt_depth : plk::io::read_pfm(depth_path);
  plk::require_same_shape(depth, scene.gt_depth, "loss --depth");
  plk::require_lidar(scene.lidar);

  auto view_loss = [&] {
    return plk::ViewSynthesisLoss(
        scene.image_t,
        {plk::SourceView{scene.image_prev, scene.pose_to_prev},
         plk::SourceView{scene.image_next, scene.pose_to_next}},
        depth, scene.cam, cfg.photometric);
  };
  if (!dump_dir.empty()) fs::create_directories(dump_dir);

  double value = 0.0;
  switch (mode) {
    case plk::SupervisionMode::M: {
      const plk::ViewSynthesisLoss vs = view_loss();
      value = vs.mean();
      if (!dump_dir.empty()) plk::io::write_pfm(fs::path(dump_dir) / "l_m.pfm", vs.pe_map());
      break;
    }
    case plk::SupervisionMode::D: {
      const plk::GradPair d =
          plk::supervised_depth_loss(depth, scene.lidar, cfg.fit.supervised_reduction);
      value = d.value;
      if (!dump_dir.empty()) plk::io::write_pfm(fs::path(dump_dir) / "l_d.pfm", d.map);
      break;
    }
    case plk::SupervisionMode::MD: {
      const plk::ViewSynthesisLoss vs = view_loss();
      const plk::GradPair d = plk::supervised_depth_loss(depth, scene.lidar, plk::Reduction::sum);
      const plk::GradPair md =
          plk::combined_md_loss(vs.pe_map(), d.map, scene.lidar, cfg.md_weights);
      value = md.value;
      if (!dump_dir.empty()) {
        plk::io::write_pfm(fs::path(dump_dir) / "l_m.pfm", vs.pe_map());
        plk::io::write_pfm(fs::path(dump_dir) / "l_d.pfm", d.map);
        plk::io::write_pfm(fs::path(dump_dir) / "l_md.pfm", md.map);
      }
      break;
    }
  }
  print_scalar(value);
  return kExitOk;
}

int cmd_gradcheck(const std::string& op, std::uint64_t seed, std::size_t trials) {
  std::vector<std::string> ops;
  if (op == "all") {
    ops = plk::gradcheck_op_names();
  } else {
    ops.push_back(op);
  }
  bool ok = true;
  for (const std::string& name : ops) {
    const plk::GradcheckResult r = plk::run_gradcheck(name, seed, trials);
    const plk::GradCheckReport& w = r.worst.report;
    std::printf("%s %s trials=%zu failed=%zu checked=%zu max_rel=%.3e max_abs=%.3e "
                "worst_trial=%llu worst_wrt=%s worst_index=%zu\n",
                r.passed() ? "PASS" : "FAIL", r.op.c_str(), r.trials, r.failed_trials,
                r.elements_checked, w.max_rel_error, w.max_abs_error,
                static_cast<unsigned long long>(r.worst.trial), r.worst.wrt.c_str(),
                w.worst_index);
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitNumeric;
}

plk::SceneOptions scene_options(const plk::RunConfig& cfg, const std::string& kind,
                                std::optional<std::uint64_t> seed) {
  plk::SceneOptions opts = cfg.scene;
  opts.kind = plk::scene_kind_from_string(kind);
  opts.cam = cfg.camera_or_default();
  if (seed) opts.seed = *seed;
  return opts;
}

int cmd_fit(const std::string& kind, const std::string& mode, const std::string& config_path,
            const std::string& out, std::optional<std::uint64_t> seed) {
  plk::RunConfig cfg = load_config(config_path);
  cfg.fit.mode = plk::supervision_mode_from_string(mode);
  if (seed) cfg.fit.seed = *seed;
  const plk::SyntheticScene scene = plk::make_scene(scene_options(cfg, kind, seed));
  const plk::FitResult r = plk::fit_depth(scene, cfg.depth_param, cfg.fit);
  const fs::path dir(out);
  fs::create_directories(dir);
  plk::io::write_pfm(dir / "disparity.pfm", r.disparity);
  plk::io::write_pfm(dir / "depth.pfm", r.depth);
  plk::io::write_loss_trace(dir / "loss_trace.csv", r.loss_trace);
  plk::io::write_bytes_atomic(dir / "metrics.json",
                              plk::depth_metrics_to_json(r.metrics, r.median_abs_rel));
  print_scalar(r.loss_trace.empty() ? 0.0 : r.loss_trace.back());
  return kExitOk;
}

int cmd_synth(const std::string& kind, const std::string& config_path, const std::string& out,
              std::optional<std::uint64_t> seed) {
  const plk::RunConfig cfg = load_config(config_path);
  const plk::SyntheticScene scene = plk::make_scene(scene_options(cfg, kind, seed));
  plk::io::write_scene_dir(out, scene);
  plk::io::write_bytes_atomic(fs::path(out) / "camera.json", plk::camera_to_json(scene.cam));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plk: pseudo-LiDAR depth, voxelization and loss tooling"};
  app.require_subcommand(1);

  std::string depth_path, camera_path, out, text_out, cloud_path, grid_path, bev, bev_out;
  std::string mode, config_path, inputs, dump_dir, op, kind;
  std::optional<double> min_depth, max_depth;
  std::optional<std::uint64_t> seed;
  std::uint64_t gc_seed = 0;
  std::size_t trials = 20;

  auto* d2c = app.add_subcommand("depth-to-cloud", "Back-project a depth PFM to a PLPC cloud");
  d2c->add_option("--depth", depth_path, "Depth map (PFM, 1 channel)")->required();
  d2c->add_option("--camera", camera_path, "Camera JSON {f, cx, cy, width, height}")->required();
  d2c->add_option("--out", out, "Output PLPC file")->required();
  d2c->add_option("--text", text_out, "Also write 'x y z' lines here");
  d2c->add_option("--min-depth", min_depth, "Drop pixels nearer than this");
  d2c->add_option("--max-depth", max_depth, "Drop pixels farther than this");

  auto* quant = app.add_subcommand("quantize", "Soft-quantize a PLPC cloud into a voxel tensor");
  quant->add_option("--cloud", cloud_path, "Input PLPC file")->required();
  quant->add_option("--grid", grid_path, "Voxel grid JSON")->required();
  quant->add_option("--out", out, "Output TNS file (sidecar written to OUT.json)")->required();
  quant->add_option("--bev", bev, "Also write a BEV map")->check(CLI::IsMember({"max", "sum"}));
  quant->add_option("--bev-out", bev_out, "BEV output path (default OUT with .bev.tns)");

  auto* loss = app.add_subcommand("loss", "Evaluate a loss on a scene directory");
  loss->add_option("--mode", mode, "M, D or MD")->required()->check(CLI::IsMember({"M", "D", "MD"}));
  loss->add_option("--config", config_path, "Run config JSON");
  loss->add_option("--inputs", inputs, "Scene directory written by 'synth'")->required();
  loss->add_option("--depth", depth_path, "Predicted depth PFM (default: scene ground truth)");
  loss->add_option("--dump-maps", dump_dir, "Write per-pixel loss maps here");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of analytic gradients");
  gc->add_option("--op", op, "Op name or 'all'")->required();
  gc->add_option("--seed", gc_seed, "Base seed");
  gc->add_option("--trials", trials, "Random instances per op");

  auto* fit = app.add_subcommand("fit", "Fit a depth map on a synthetic scene");
  fit->add_option("--scene", kind, "plane, two_planes or textured_random")->required();
  fit->add_option("--mode", mode, "M, D or MD")->required()->check(CLI::IsMember({"M", "D", "MD"}));
  fit->add_option("--config", config_path, "Run config JSON");
  fit->add_option("--out", out, "Output directory")->required();
  fit->add_option("--seed", seed, "Scene and fit seed (overrides config)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic scene directory");
  synth->add_option("--kind", kind, "plane, two_planes or textured_random")->required();
  synth->add_option("--config", config_path, "Run config JSON (scene section)");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--seed", seed, "Scene seed (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*d2c) return cmd_depth_to_cloud(depth_path, camera_path, out, text_out, min_depth, max_depth);
    if (*quant) return cmd_quantize(cloud_path, grid_path, out, bev, bev_out);
    if (*loss) return cmd_loss(mode, config_path, inputs, depth_path, dump_dir);
    if (*gc) return cmd_gradcheck(op, gc_seed, trials);
    if (*fit) return cmd_fit(kind, mode, config_path, out, seed);
    if (*synth) return cmd_synth(kind, config_path, out, seed);
  } catch (const plk::Error& e) {
    std::cerr << "plk: " << e.what();
    if (e.index()) std::cerr << " (index " << *e.index() << ")";
    std::cerr << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "plk: io: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "plk: " << e.what() << "\n";
    return kExitContract;
  }
  return kExitInput;
}
