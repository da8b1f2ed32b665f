#include "plk/io.hpp"

#include <unistd.h>

#include <bit>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json_util.hpp"
#include "plk/error.hpp"

namespace plk::io {

namespace {

static_assert(std::numeric_limits<float>::is_iec559);

std::string source_name(const fs::path& p) { return p.string(); }

[[noreturn]] void parse_fail(std::string_view source, std::size_t offset, const std::string& what) {
  throw Error(ErrorCode::ParseError,
              std::string(source) + ": byte offset " + std::to_string(offset) + ": " + what);
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t at, bool little = true) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const auto b = static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + i]));
    v |= little ? b << (8 * i) : b << (8 * (3 - i));
  }
  return v;
}

float get_f32(std::string_view bytes, std::size_t at, bool little = true) {
  return std::bit_cast<float>(get_u32(bytes, at, little));
}

// Reads one whitespace-delimited token starting at pos; pos ends on the
// delimiter following it.
std::string_view next_token(std::string_view bytes, std::size_t& pos, std::string_view source) {
  while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) parse_fail(source, start, "unexpected end of header");
  return bytes.substr(start, pos - start);
}

template <typename T>
T parse_number(std::string_view tok, std::size_t offset, std::string_view source) {
  T v{};
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || p != tok.data() + tok.size()) {
    parse_fail(source, offset, "bad number '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

void write_bytes_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const fs::path tmp =
      dir / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::IoError, "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot rename onto " + path.string());
  }
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return std::move(ss).str();
}

std::string encode_pfm(const DenseGrid& image) {
  if (image.rank() != 2 || (image.channels() != 1 && image.channels() != 3)) {
    throw Error(ErrorCode::InvalidShape,
                "PFM needs a rank-2 grid with 1 or 3 channels, got " + image.shape_string());
  }
  const std::size_t h = image.height(), w = image.width(), c = image.channels();
  std::string out = c == 1 ? "Pf\n" : "PF\n";
  out += std::to_string(w) + " " + std::to_string(h) + "\n-1.0\n";
  out.reserve(out.size() + image.size() * 4);
  for (std::size_t row = h; row-- > 0;) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) put_f32(out, image.at(row, x, ch));
    }
  }
  return out;
}

DenseGrid decode_pfm(std::string_view bytes, std::string_view source) {
  std::size_t pos = 0;
  const std::string_view magic = next_token(bytes, pos, source);
  std::size_t channels = 0;
  if (magic == "Pf") {
    channels = 1;
  } else if (magic == "PF") {
    channels = 3;
  } else {
    parse_fail(source, 0, "bad PFM magic '" + std::string(magic) + "'");
  }
  std::size_t at = pos;
  const auto wtok = next_token(bytes, pos, source);
  const auto w = parse_number<std::int64_t>(wtok, at, source);
  at = pos;
  const auto htok = next_token(bytes, pos, source);
  const auto h = parse_number<std::int64_t>(htok, at, source);
  at = pos;
  const auto stok = next_token(bytes, pos, source);
  const auto scale = parse_number<double>(stok, at, source);
  if (w < 1 || h < 1) parse_fail(source, at, "PFM dims must be positive");
  if (scale == 0.0 || !std::isfinite(scale)) parse_fail(source, at, "PFM scale must be nonzero");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    parse_fail(source, pos, "missing newline after PFM scale");
  }
  ++pos;
  const bool little = scale < 0.0;
  const std::size_t count =
      static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
  if (bytes.size() - pos != count * 4) {
    parse_fail(source, pos,
               "expected " + std::to_string(count * 4) + " payload bytes, found " +
                   std::to_string(bytes.size() - pos));
  }
  DenseGrid image({h, w}, static_cast<std::int64_t>(channels));
  std::size_t off = pos;
  for (std::size_t row = static_cast<std::size_t>(h); row-- > 0;) {
    for (std::size_t x = 0; x < static_cast<std::size_t>(w); ++x) {
      for (std::size_t ch = 0; ch < channels; ++ch, off += 4) {
        image.at(row, x, ch) = get_f32(bytes, off, little);
      }
    }
  }
  return image;
}

void write_pfm(const fs::path& path, const DenseGrid& image) {
  write_bytes_atomic(path, encode_pfm(image));
}

DenseGrid read_pfm(const fs::path& path) { return decode_pfm(read_bytes(path), source_name(path)); }

std::string encode_plpc(const PointCloud& cloud) {
  if (cloud.source_pixels.size() != cloud.points.size()) {
    throw Error(ErrorCode::InvalidShape, "point cloud has mismatched pixel list");
  }
  std::string out = "PLPC";
  put_u32(out, kPlpcVersion);
  put_u32(out, static_cast<std::uint32_t>(cloud.size()));
  put_u32(out, 0);
  out.reserve(16 + cloud.size() * 20);
  for (const Vec3& p : cloud.points) {
    put_f32(out, p.x());
    put_f32(out, p.y());
    put_f32(out, p.z());
  }
  for (const PixelCoord& px : cloud.source_pixels) {
    put_u32(out, px.u);
    put_u32(out, px.v);
  }
  return out;
}

PointCloud decode_plpc(std::string_view bytes, std::string_view source) {
  if (bytes.size() < 16) parse_fail(source, bytes.size(), "truncated PLPC header");
  if (bytes.substr(0, 4) != "PLPC") parse_fail(source, 0, "bad PLPC magic");
  if (get_u32(bytes, 4) != kPlpcVersion) parse_fail(source, 4, "unsupported PLPC version");
  const std::size_t n = get_u32(bytes, 8);
  if (get_u32(bytes, 12) != 0) parse_fail(source, 12, "nonzero PLPC flags");
  if (bytes.size() != 16 + n * 20) {
    parse_fail(source, 16,
               "expected " + std::to_string(16 + n * 20) + " bytes for " + std::to_string(n) +
                   " points, found " + std::to_string(bytes.size()));
  }
  PointCloud cloud;
  cloud.points.resize(n);
  cloud.source_pixels.resize(n);
  std::size_t off = 16;
  for (std::size_t i = 0; i < n; ++i, off += 12) {
    cloud.points[i] = Vec3(get_f32(bytes, off), get_f32(bytes, off + 4), get_f32(bytes, off + 8));
  }
  for (std::size_t i = 0; i < n; ++i, off += 8) {
    cloud.source_pixels[i] = {get_u32(bytes, off), get_u32(bytes, off + 4)};
  }
  return cloud;
}

void write_plpc(const fs::path& path, const PointCloud& cloud) {
  write_bytes_atomic(path, encode_plpc(cloud));
}

PointCloud read_plpc(const fs::path& path) {
  return decode_plpc(read_bytes(path), source_name(path));
}

void write_cloud_text(const fs::path& path, const PointCloud& cloud) {
  std::string out;
  char buf[96];
  for (const Vec3& p : cloud.points) {
    const int n = std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    out.append(buf, static_cast<std::size_t>(n));
  }
  write_bytes_atomic(path, out);
}

void write_tns(const fs::path& path, const DenseGrid& tensor, const VoxelGridSpec& spec) {
  std::string raw;
  raw.reserve(tensor.size() * 4);
  for (double v : tensor.values()) put_f32(raw, v);
  std::vector<std::size_t> dims = tensor.dims();
  if (tensor.channels() != 1) dims.push_back(tensor.channels());
  const detail::json side = {
      {"dims", dims},
      {"origin", {spec.origin.x(), spec.origin.y(), spec.origin.z()}},
      {"bin_size", {spec.bin_size.x(), spec.bin_size.y(), spec.bin_size.z()}},
      {"sigma", spec.sigma},
      {"neighborhood", std::string(to_string(spec.neighborhood))}};
  write_bytes_atomic(path, raw);
  write_bytes_atomic(fs::path(path.string() + ".json"), side.dump(2) + "\n");
}

TensorFile read_tns(const fs::path& path) {
  const fs::path side_path(path.string() + ".json");
  const std::string side_src = source_name(side_path);
  const detail::json side = detail::parse_json(read_bytes(side_path), side_src);
  detail::require_object(side, side_src, "sidecar");
  detail::reject_unknown_keys(side, {"dims", "origin", "bin_size", "sigma", "neighborhood"},
                              side_src, "sidecar");
  const auto dims = detail::get_or<std::vector<std::int64_t>>(side, "dims", {}, side_src);
  const auto origin = detail::get_or<std::vector<double>>(side, "origin", {}, side_src);
  const auto bin_size = detail::get_or<std::vector<double>>(side, "bin_size", {}, side_src);
  if (dims.empty() || dims.size() > 3 || origin.size() != 3 || bin_size.size() != 3) {
    throw Error(ErrorCode::ParseError,
                side_src + ": sidecar needs dims[1..3], origin[3] and bin_size[3]");
  }
  TensorFile file;
  file.spec.origin = {origin[0], origin[1], origin[2]};
  file.spec.bin_size = {bin_size[0], bin_size[1], bin_size[2]};
  file.spec.bins = {dims[0], dims.size() > 1 ? dims[1] : 1, dims.size() > 2 ? dims[2] : 1};
  file.spec.sigma =
      detail::get_or(side, "sigma", VoxelGridSpec::default_sigma(file.spec.bin_size), side_src);
  file.spec.neighborhood = neighborhood_from_string(
      detail::get_or<std::string>(side, "neighborhood", "faces6", side_src));

  const std::string raw = read_bytes(path);
  try {
    file.tensor = DenseGrid(dims, 1);
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, side_src + ": " + e.what());
  }
  if (raw.size() != file.tensor.size() * 4) {
    parse_fail(source_name(path), 0,
               "expected " + std::to_string(file.tensor.size() * 4) + " bytes, found " +
                   std::to_string(raw.size()));
  }
  for (std::size_t i = 0; i < file.tensor.size(); ++i) file.tensor[i] = get_f32(raw, i * 4);
  return file;
}

namespace {

detail::json pose_json(const PoseSE3& p) {
  detail::json r = detail::json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(p.R(i, j));
  }
  return {{"R", r}, {"t", {p.t.x(), p.t.y(), p.t.z()}}};
}

PoseSE3 pose_from(const detail::json& j, std::string_view src, std::string_view where) {
  detail::require_object(j, src, where);
  detail::reject_unknown_keys(j, {"R", "t"}, src, where);
  const auto r = detail::get_or<std::vector<double>>(j, "R", {}, src);
  const auto t = detail::get_or<std::vector<double>>(j, "t", {}, src);
  if (r.size() != 9 || t.size() != 3) {
    throw Error(ErrorCode::ParseError,
                std::string(src) + ": " + std::string(where) + " needs R[9] and t[3]");
  }
  PoseSE3 p;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) p.R(i, k) = r[static_cast<std::size_t>(3 * i + k)];
  }
  p.t = Vec3(t[0], t[1], t[2]);
  p.validate();
  return p;
}

}  // namespace

void write_scene_dir(const fs::path& dir, const SyntheticScene& scene) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create directory " + dir.string());
  write_pfm(dir / "image_t.pfm", scene.image_t);
  write_pfm(dir / "image_prev.pfm", scene.image_prev);
  write_pfm(dir / "image_next.pfm", scene.image_next);
  write_pfm(dir / "gt_depth.pfm", scene.gt_depth);
  write_pfm(dir / "lidar.pfm", scene.lidar);
  const CameraIntrinsics& c = scene.cam;
  const detail::json j = {
      {"kind", std::string(to_string(scene.kind))},
      {"seed", scene.seed},
      {"camera", {{"f", c.f}, {"cx", c.cx}, {"cy", c.cy}, {"width", c.width}, {"height", c.height}}},
      {"pose_to_prev", pose_json(scene.pose_to_prev)},
      {"pose_to_next", pose_json(scene.pose_to_next)}};
  write_bytes_atomic(dir / "scene.json", j.dump(2) + "\n");
}

SyntheticScene read_scene_dir(const fs::path& dir) {
  const fs::path meta = dir / "scene.json";
  const std::string src = source_name(meta);
  const detail::json j = detail::parse_json(read_bytes(meta), src);
  detail::require_object(j, src, "scene");
  detail::reject_unknown_keys(j, {"kind", "seed", "camera", "pose_to_prev", "pose_to_next"}, src,
                              "scene");
  SyntheticScene s;
  s.kind = scene_kind_from_string(detail::get_or<std::string>(j, "kind", "plane", src));
  s.seed = detail::get_or<std::uint64_t>(j, "seed", 0, src);
  if (!j.contains("camera") || !j.contains("pose_to_prev") || !j.contains("pose_to_next")) {
    throw Error(ErrorCode::ParseError, src + ": scene needs camera, pose_to_prev, pose_to_next");
  }
  const detail::json& cj = detail::require_object(j["camera"], src, "camera");
  detail::reject_unknown_keys(cj, {"f", "cx", "cy", "width", "height"}, src, "camera");
  s.cam.f = detail::get_or(cj, "f", s.cam.f, src);
  s.cam.cx = detail::get_or(cj, "cx", s.cam.cx, src);
  s.cam.cy = detail::get_or(cj, "cy", s.cam.cy, src);
  s.cam.width = detail::get_or(cj, "width", s.cam.width, src);
  s.cam.height = detail::get_or(cj, "height", s.cam.height, src);
  s.cam.validate();
  s.pose_to_prev = pose_from(j["pose_to_prev"], src, "pose_to_prev");
  s.pose_to_next = pose_from(j["pose_to_next"], src, "pose_to_next");
  s.image_t = read_pfm(dir / "image_t.pfm");
  s.image_prev = read_pfm(dir / "image_prev.pfm");
  s.image_next = read_pfm(dir / "image_next.pfm");
  s.gt_depth = read_pfm(dir / "gt_depth.pfm");
  s.lidar = read_pfm(dir / "lidar.pfm");
  require_image(s.gt_depth, 1, "scene gt_depth");
  require_same_extent(s.image_t, s.gt_depth, "scene image_t");
  require_same_shape(s.image_t, s.image_prev, "scene image_prev");
  require_same_shape(s.image_t, s.image_next, "scene image_next");
  require_same_shape(s.gt_depth, s.lidar, "scene lidar");
  return s;
}

std::string format_scalar(double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

void write_loss_trace(const fs::path& path, const std::vector<double>& trace) {
  std::string out;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += std::to_string(i) + "," + format_scalar(trace[i]) + "\n";
  }
  write_bytes_atomic(path, out);
}

}  // namespace plk::io
