#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "plk/config.hpp"
#include "plk/io.hpp"
#include "test_util.hpp"

namespace plk {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("plk_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

using Pfm = TempDir;

TEST_F(Pfm, RoundTripQuantizesOnce) {
  std::mt19937_64 rng(1);
  for (std::int64_t ch : {1, 3}) {
    const DenseGrid g = test::random_grid(rng, {5, 7}, ch, -3.0, 3.0);
    const fs::path p = dir_ / ("img" + std::to_string(ch) + ".pfm");
    io::write_pfm(p, g);
    const DenseGrid r = io::read_pfm(p);
    ASSERT_TRUE(r.same_shape(g));
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(r[i], f32(g[i]));
    io::write_pfm(p, r);
    EXPECT_EQ(io::read_pfm(p).values(), r.values());
  }
}

TEST_F(Pfm, HeaderAndBottomUpRows) {
  DenseGrid g({2, 3}, 1);
  g.values() = {1, 2, 3, 4, 5, 6};
  const std::string bytes = io::encode_pfm(g);
  EXPECT_EQ(bytes.substr(0, 12), "Pf\n3 2\n-1.0\n");
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + 12, 4);
  EXPECT_EQ(first, 4.0f);
  EXPECT_PLK_ERROR(io::encode_pfm(DenseGrid({2, 2}, 2)), ErrorCode::InvalidShape);
}

TEST_F(Pfm, ParseErrorsNameSourceAndOffset) {
  try {
    io::decode_pfm("PX\n3 2\n-1.0\n", "bad.pfm");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("bad.pfm"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("byte offset 0"), std::string::npos);
  }
  EXPECT_PLK_ERROR(io::decode_pfm("Pf\n3 2\n-1.0\n\x01\x02", "short.pfm"), ErrorCode::ParseError);
  EXPECT_PLK_ERROR(io::decode_pfm("Pf\nx 2\n-1.0\n", "dims.pfm"), ErrorCode::ParseError);
  EXPECT_PLK_ERROR(io::read_pfm(dir_ / "missing.pfm"), ErrorCode::IoError);
}

using Plpc = TempDir;

TEST_F(Plpc, RoundTripAndLayout) {
  PointCloud pc;
  pc.points = {{0.1, -2.5, 3.0}, {1e-3, 7.25, 99.5}};
  pc.source_pixels = {{3, 4}, {100, 0}};
  const std::string bytes = io::encode_plpc(pc);
  ASSERT_EQ(bytes.size(), 16u + 2 * 12 + 2 * 8);
  EXPECT_EQ(bytes.substr(0, 4), "PLPC");
  const PointCloud r = io::decode_plpc(bytes);
  ASSERT_EQ(r.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    for (int a = 0; a < 3; ++a) EXPECT_EQ(r.points[i][a], f32(pc.points[i][a]));
    EXPECT_EQ(r.source_pixels[i], pc.source_pixels[i]);
  }
  EXPECT_EQ(io::encode_plpc(r), bytes);
  const fs::path p = dir_ / "c.plpc";
  io::write_plpc(p, PointCloud{});
  EXPECT_TRUE(io::read_plpc(p).empty());
  EXPECT_PLK_ERROR(io::decode_plpc("PLPX" + bytes.substr(4)), ErrorCode::ParseError);
  EXPECT_PLK_ERROR(io::decode_plpc(bytes.substr(0, 20)), ErrorCode::ParseError);
}

TEST_F(Plpc, TextExport) {
  PointCloud pc;
  pc.points = {{1.0 / 3.0, 2, -0.5}};
  pc.source_pixels = {{0, 0}};
  const fs::path p = dir_ / "c.txt";
  io::write_cloud_text(p, pc);
  EXPECT_EQ(io::read_bytes(p), "0.333333333 2 -0.5\n");
}

using Tns = TempDir;

TEST_F(Tns, RoundTripWithSidecar) {
  std::mt19937_64 rng(2);
  VoxelGridSpec s;
  s.bins = {3, 4, 5};
  s.origin = Vec3(-1, 0.5, 2);
  s.bin_size = Vec3(0.25, 0.5, 1.0);
  s.sigma = 0.3;
  s.neighborhood = Neighborhood::full26;
  const DenseGrid t = test::random_grid(rng, {3, 4, 5}, 1, 0.0, 2.0);
  const fs::path p = dir_ / "t.tns";
  io::write_tns(p, t, s);
  EXPECT_TRUE(fs::exists(dir_ / "t.tns.json"));
  EXPECT_EQ(fs::file_size(p), 60u * 4u);
  const io::TensorFile r = io::read_tns(p);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(r.tensor[i], f32(t[i]));
  EXPECT_EQ(r.spec.bins, s.bins);
  EXPECT_EQ(r.spec.origin, s.origin);
  EXPECT_EQ(r.spec.bin_size, s.bin_size);
  EXPECT_EQ(r.spec.sigma, s.sigma);
  EXPECT_EQ(r.spec.neighborhood, s.neighborhood);
  fs::remove(dir_ / "t.tns.json");
  EXPECT_PLK_ERROR(io::read_tns(p), ErrorCode::IoError);
}

using Misc = TempDir;

TEST_F(Misc, LossTraceAndScalarFormat) {
  const fs::path p = dir_ / "trace.csv";
  io::write_loss_trace(p, {0.1, 2.0});
  EXPECT_EQ(io::read_bytes(p), "0,0.10000000000000001\n1,2\n");
  EXPECT_EQ(io::format_scalar(0.0), "0");
  EXPECT_EQ(std::stod(io::format_scalar(1.0 / 3.0)), 1.0 / 3.0);
}

TEST_F(Misc, AtomicWriteLeavesNoTempFiles) {
  io::write_bytes_atomic(dir_ / "a.bin", "hello");
  io::write_bytes_atomic(dir_ / "a.bin", "world");
  EXPECT_EQ(io::read_bytes(dir_ / "a.bin"), "world");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir_)) ++n;
  EXPECT_EQ(n, 1u);
}

TEST_F(Misc, SceneDirRoundTrip) {
  const SyntheticScene s = make_scene(SceneKind::two_planes, 16, 20, default_camera(16, 20), 0.5, 9);
  io::write_scene_dir(dir_ / "scene", s);
  const SyntheticScene r = io::read_scene_dir(dir_ / "scene");
  EXPECT_EQ(r.kind, s.kind);
  EXPECT_EQ(r.seed, s.seed);
  EXPECT_EQ(r.cam.f, s.cam.f);
  EXPECT_EQ(r.cam.cx, s.cam.cx);
  EXPECT_EQ(r.pose_to_prev.t, s.pose_to_prev.t);
  EXPECT_EQ(r.pose_to_next.R, s.pose_to_next.R);
  for (std::size_t i = 0; i < s.image_t.size(); ++i) EXPECT_EQ(r.image_t[i], f32(s.image_t[i]));
  EXPECT_EQ(r.gt_depth.values(), s.gt_depth.values());
  EXPECT_EQ(r.lidar.values(), s.lidar.values());
}

TEST(Config, DefaultsAndOverrides) {
  const RunConfig def = parse_run_config("{}");
  EXPECT_EQ(def.depth_param.sigma_min, 0.01);
  EXPECT_EQ(def.photometric.alpha, 0.85);
  EXPECT_EQ(def.fit.learning_rate, 1e-2);
  EXPECT_FALSE(def.camera.has_value());
  const RunConfig c = parse_run_config(R"({
    "depth_param": {"d_prior": 10},
    "photometric": {"alpha": 0.5, "combine": "mean"},
    "ssim": {"window": 5},
    "md_weights": {"lambda_m": 0.25},
    "fit": {"mode": "D", "steps": 7, "adam_betas": [0.8, 0.99]},
    "scene": {"height": 20, "width": 30, "lidar_step_u": 1, "lidar_step_v": 1},
    "depth_window": {"max_depth": 50}
  })");
  EXPECT_EQ(c.depth_param.d_prior, 10.0);
  EXPECT_EQ(c.fit.mode, SupervisionMode::D);
  EXPECT_EQ(c.fit.steps, 7);
  EXPECT_EQ(c.fit.adam_beta1, 0.8);
  EXPECT_EQ(c.fit.adam_beta2, 0.99);
  EXPECT_EQ(c.fit.photometric.alpha, 0.5);
  EXPECT_EQ(c.fit.photometric.combine, ViewCombine::mean);
  EXPECT_EQ(c.fit.photometric.ssim.window, 5);
  EXPECT_EQ(c.fit.md_weights.lambda_m, 0.25);
  EXPECT_EQ(c.scene.lidar_step_u, 1);
  EXPECT_EQ(c.depth_window.max_depth, 50.0);
  EXPECT_EQ(c.camera_or_default().width, 30);
  const RunConfig again = parse_run_config(run_config_to_json(c));
  EXPECT_EQ(run_config_to_json(again), run_config_to_json(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_PLK_ERROR(parse_run_config(R"({"fit": {"stepz": 3}})"), ErrorCode::ParseError);
  EXPECT_PLK_ERROR(parse_run_config(R"({"bogus": {}})"), ErrorCode::ParseError);
  EXPECT_PLK_ERROR(parse_run_config(R"({"depth_param": {"d_prior": -1}})"),
                   ErrorCode::InvalidConfig);
  EXPECT_PLK_ERROR(parse_run_config(R"({"fit": {"mode": "X"}})"), ErrorCode::InvalidConfig);
  try {
    parse_run_config("{\n  \"fit\": [1,", "cfg.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("cfg.json"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("byte offset"), std::string::npos);
  }
}

TEST(Config, CameraAndGridFiles) {
  const CameraIntrinsics cam = parse_camera(R"({"f": 1, "cx": 0.5, "cy": 0.5, "width": 2, "height": 2})");
  EXPECT_EQ(cam.width, 2);
  EXPECT_EQ(parse_camera(camera_to_json(cam)).cx, 0.5);
  EXPECT_PLK_ERROR(parse_camera(R"({"f": 1, "cx": 3, "cy": 0.5, "width": 2, "height": 2})"),
                   ErrorCode::InvalidConfig);
  const VoxelGridSpec g =
      parse_grid_spec(R"({"origin": [0,0,0], "bin_size": [1, 2, 3], "bins": [2,2,2]})");
  EXPECT_EQ(g.sigma, 2.0);
  EXPECT_EQ(g.neighborhood, Neighborhood::faces6);
  const VoxelGridSpec back = parse_grid_spec(grid_spec_to_json(g));
  EXPECT_EQ(back.bin_size, g.bin_size);
  EXPECT_PLK_ERROR(parse_grid_spec(R"({"origin": [0,0,0], "bin_size": [1,1,1], "bins": [2,2,2], "sigma": 0})"),
                   ErrorCode::InvalidConfig);
  EXPECT_PLK_ERROR(parse_grid_spec(R"({"origin": [0,0], "bin_size": [1,1,1], "bins": [2,2,2]})"),
                   ErrorCode::ParseError);
}

}  // namespace
}  // namespace plk
