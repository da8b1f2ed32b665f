#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "plk/camera.hpp"
#include "plk/grid.hpp"
#include "plk/optim_fit.hpp"
#include "plk/soft_quant.hpp"

namespace plk::io {

namespace fs = std::filesystem;

// All writers go through a temporary file in the target directory followed
// by a rename, so readers never observe a partial file.
void write_bytes_atomic(const fs::path& path, std::string_view bytes);
std::string read_bytes(const fs::path& path);

/// Portable Float Map. Rank-2 grids with 1 channel ("Pf") or 3 ("PF"),
/// scale -1 (little-endian f32), rows stored bottom-to-top. Values are
/// quantized to f32 on write.
void write_pfm(const fs::path& path, const DenseGrid& image);
DenseGrid read_pfm(const fs::path& path);
std::string encode_pfm(const DenseGrid& image);
DenseGrid decode_pfm(std::string_view bytes, std::string_view source = "<memory>");

/// PLPC point cloud: "PLPC", u32 version = 1, u32 count, u32 flags = 0,
/// then count x (x, y, z) f32, then count x (u, v) u32. Little-endian.
inline constexpr std::uint32_t kPlpcVersion = 1;
void write_plpc(const fs::path& path, const PointCloud& cloud);
PointCloud read_plpc(const fs::path& path);
std::string encode_plpc(const PointCloud& cloud);
PointCloud decode_plpc(std::string_view bytes, std::string_view source = "<memory>");
/// One "x y z" line per point, 9 significant digits.
void write_cloud_text(const fs::path& path, const PointCloud& cloud);

/// TNS tensor: raw little-endian f32 in row-major order plus a mandatory
/// JSON sidecar `<path>.json` with dims, origin, bin_size, sigma and
/// neighborhood.
struct TensorFile {
  DenseGrid tensor;
  VoxelGridSpec spec;
};
void write_tns(const fs::path& path, const DenseGrid& tensor, const VoxelGridSpec& spec);
TensorFile read_tns(const fs::path& path);

/// "iteration,loss" per line, losses with 17 significant digits.
void write_loss_trace(const fs::path& path, const std::vector<double>& trace);

/// Scene directory: image_t.pfm, image_prev.pfm, image_next.pfm,
/// gt_depth.pfm, lidar.pfm and scene.json (kind, seed, camera, poses).
/// Images go through PFM and are therefore f32-quantized.
void write_scene_dir(const fs::path& dir, const SyntheticScene& scene);
SyntheticScene read_scene_dir(const fs::path& dir);

/// Shortest decimal with 17 significant digits, as printed by the CLI.
std::string format_scalar(double v);

}  // namespace plk::io
