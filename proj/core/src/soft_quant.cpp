#include "plk/soft_quant.hpp"

#include <cmath>
#include <string>

#include "plk/error.hpp"
#include "plk/parallel.hpp"

namespace plk {

std::string_view to_string(Neighborhood n) {
  return n == Neighborhood::faces6 ? "faces6" : "full26";
}

Neighborhood neighborhood_from_string(std::string_view s) {
  if (s == "faces6") return Neighborhood::faces6;
  if (s == "full26") return Neighborhood::full26;
  throw Error(ErrorCode::InvalidConfig,
              "neighborhood must be faces6 or full26, got '" + std::string(s) + "'");
}

std::string_view to_string(BevMode m) { return m == BevMode::max ? "max" : "sum"; }

BevMode bev_mode_from_string(std::string_view s) {
  if (s == "max") return BevMode::max;
  if (s == "sum") return BevMode::sum;
  throw Error(ErrorCode::InvalidConfig, "bev mode must be max or sum, got '" + std::string(s) + "'");
}

void VoxelGridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(bin_size[a] > 0.0) || !std::isfinite(bin_size[a])) {
      throw Error(ErrorCode::InvalidConfig, "voxel grid: bin_size must be > 0");
    }
    if (bins[a] < 1) {
      throw Error(ErrorCode::InvalidConfig, "voxel grid: bins must be >= 1");
    }
    if (!std::isfinite(origin[a])) {
      throw Error(ErrorCode::InvalidConfig, "voxel grid: origin must be finite");
    }
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::InvalidConfig, "voxel grid: sigma must be > 0");
  }
}

std::array<std::int64_t, 3> VoxelGridSpec::unflatten(std::size_t m) const {
  const auto mm = static_cast<std::int64_t>(m);
  const std::int64_t k = mm % bins[2];
  const std::int64_t j = (mm / bins[2]) % bins[1];
  const std::int64_t i = mm / (bins[1] * bins[2]);
  return {i, j, k};
}

Vec3 VoxelGridSpec::center(std::int64_t i, std::int64_t j, std::int64_t k) const {
  return {origin.x() + (static_cast<double>(i) + 0.5) * bin_size.x(),
          origin.y() + (static_cast<double>(j) + 0.5) * bin_size.y(),
          origin.z() + (static_cast<double>(k) + 0.5) * bin_size.z()};
}

Vec3 VoxelGridSpec::center(std::size_t m) const {
  const auto [i, j, k] = unflatten(m);
  return center(i, j, k);
}

namespace {

using Offset = std::array<std::int64_t, 3>;

const std::vector<Offset>& offsets_for(Neighborhood n) {
  static const std::vector<Offset> faces{
      {-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
  static const std::vector<Offset> full = [] {
    std::vector<Offset> out;
    for (std::int64_t di = -1; di <= 1; ++di)
      for (std::int64_t dj = -1; dj <= 1; ++dj)
        for (std::int64_t dk = -1; dk <= 1; ++dk)
          if (di != 0 || dj != 0 || dk != 0) out.push_back({di, dj, dk});
    return out;
  }();
  return n == Neighborhood::faces6 ? faces : full;
}

// Calls fn(flat_index) for each in-grid neighbour of (i, j, k), in table order.
template <typename Fn>
void for_each_neighbor(const VoxelGridSpec& spec, std::int64_t i, std::int64_t j,
                       std::int64_t k, Fn&& fn) {
  for (const Offset& o : offsets_for(spec.neighborhood)) {
    const std::int64_t a = i + o[0];
    const std::int64_t b = j + o[1];
    const std::int64_t c = k + o[2];
    if (a < 0 || b < 0 || c < 0 || a >= spec.bins[0] || b >= spec.bins[1] ||
        c >= spec.bins[2]) {
      continue;
    }
    fn(spec.flat_index(a, b, c));
  }
}

std::int64_t axis_bin(double p, double origin, double size, std::int64_t count) {
  const double r = (p - origin) / size;
  if (!(r >= 0.0 && r <= static_cast<double>(count))) return kOutsideGrid;
  // Nearest centre (i + 0.5); a point on the face between i-1 and i goes to i-1.
  const auto idx = static_cast<std::int64_t>(std::ceil(r)) - 1;
  return idx < 0 ? 0 : idx;
}

double kernel(const Vec3& p, const Vec3& c, double inv_sigma2) {
  return std::exp(-(p - c).squaredNorm() * inv_sigma2);
}

// Points grouped by bin, stable in point order.
struct BinIndex {
  std::vector<std::int64_t> assignment;
  std::vector<std::size_t> offsets;  // bin_count + 1
  std::vector<std::size_t> members;

  std::size_t count(std::size_t m) const { return offsets[m + 1] - offsets[m]; }
};

BinIndex build_index(const std::vector<Vec3>& points, const VoxelGridSpec& spec) {
  BinIndex idx;
  idx.assignment = assign_bins(points, spec);
  const std::size_t M = spec.bin_count();
  idx.offsets.assign(M + 1, 0);
  for (std::int64_t b : idx.assignment) {
    if (b != kOutsideGrid) ++idx.offsets[static_cast<std::size_t>(b) + 1];
  }
  for (std::size_t m = 0; m < M; ++m) idx.offsets[m + 1] += idx.offsets[m];
  idx.members.resize(idx.offsets[M]);
  std::vector<std::size_t> cursor(idx.offsets.begin(), idx.offsets.end() - 1);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const std::int64_t b = idx.assignment[p];
    if (b != kOutsideGrid) idx.members[cursor[static_cast<std::size_t>(b)]++] = p;
  }
  return idx;
}

}  // namespace

std::vector<std::size_t> neighbor_bins(const VoxelGridSpec& spec, std::size_t m) {
  const auto [i, j, k] = spec.unflatten(m);
  std::vector<std::size_t> out;
  for_each_neighbor(spec, i, j, k, [&](std::size_t n) { out.push_back(n); });
  return out;
}

std::vector<std::int64_t> assign_bins(const std::vector<Vec3>& points,
                                      const VoxelGridSpec& spec) {
  spec.validate();
  std::vector<std::int64_t> out(points.size(), kOutsideGrid);
  parallel_for(points.size(), [&](std::size_t n) {
    const Vec3& p = points[n];
    const std::int64_t i = axis_bin(p.x(), spec.origin.x(), spec.bin_size.x(), spec.bins[0]);
    const std::int64_t j = axis_bin(p.y(), spec.origin.y(), spec.bin_size.y(), spec.bins[1]);
    const std::int64_t k = axis_bin(p.z(), spec.origin.z(), spec.bin_size.z(), spec.bins[2]);
    if (i == kOutsideGrid || j == kOutsideGrid || k == kOutsideGrid) return;
    out[n] = static_cast<std::int64_t>(spec.flat_index(i, j, k));
  }, 4096);
  return out;
}

std::vector<std::int64_t> assign_bins(const PointCloud& cloud, const VoxelGridSpec& spec) {
  return assign_bins(cloud.points, spec);
}

DenseGrid soft_quantize(const std::vector<Vec3>& points, const VoxelGridSpec& spec) {
  spec.validate();
  const BinIndex idx = build_index(points, spec);
  const double inv_sigma2 = 1.0 / (spec.sigma * spec.sigma);
  DenseGrid out({spec.bins[0], spec.bins[1], spec.bins[2]}, 1, 0.0);

  // Mean kernel between the points of bin `src` and the centre c.
  auto pair_term = [&](std::size_t src, const Vec3& c) {
    const std::size_t n = idx.count(src);
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t q = idx.offsets[src]; q < idx.offsets[src + 1]; ++q) {
      acc += kernel(points[idx.members[q]], c, inv_sigma2);
    }
    return acc / static_cast<double>(n);
  };

  parallel_for(spec.bin_count(), [&](std::size_t m) {
    const auto [i, j, k] = spec.unflatten(m);
    bool any = idx.count(m) > 0;
    std::size_t neighbors = 0;
    for_each_neighbor(spec, i, j, k, [&](std::size_t n) {
      ++neighbors;
      any = any || idx.count(n) > 0;
    });
    if (!any) return;
    const Vec3 c = spec.center(i, j, k);
    const double self = pair_term(m, c);
    double around = 0.0;
    for_each_neighbor(spec, i, j, k, [&](std::size_t n) { around += pair_term(n, c); });
    out[m] = neighbors > 0 ? self + around / static_cast<double>(neighbors) : self;
  }, 1024);
  return out;
}

DenseGrid soft_quantize(const PointCloud& cloud, const VoxelGridSpec& spec) {
  return soft_quantize(cloud.points, spec);
}

std::vector<Vec3> soft_quantize_grad(const std::vector<Vec3>& points,
                                     const VoxelGridSpec& spec, const DenseGrid& upstream) {
  spec.validate();
  if (upstream.rank() != 3 || upstream.channels() != 1 ||
      upstream.extent(0) != static_cast<std::size_t>(spec.bins[0]) ||
      upstream.extent(1) != static_cast<std::size_t>(spec.bins[1]) ||
      upstream.extent(2) != static_cast<std::size_t>(spec.bins[2])) {
    throw Error(ErrorCode::InvalidShape,
                "soft_quantize_grad: upstream " + upstream.shape_string() +
                    " does not match grid bins");
  }
  const BinIndex idx = build_index(points, spec);
  const double inv_sigma2 = 1.0 / (spec.sigma * spec.sigma);
  std::vector<Vec3> grads(points.size(), Vec3::Zero());

  auto neighbor_count = [&](std::size_t m) {
    const auto [i, j, k] = spec.unflatten(m);
    std::size_t n = 0;
    for_each_neighbor(spec, i, j, k, [&](std::size_t) { ++n; });
    return n;
  };

  parallel_for(points.size(), [&](std::size_t p) {
    const std::int64_t b = idx.assignment[p];
    if (b == kOutsideGrid) return;
    const auto home = static_cast<std::size_t>(b);
    const double inv_count = 1.0 / static_cast<double>(idx.count(home));
    const Vec3& x = points[p];

    // d/dx exp(-|x - c|^2 / s^2) = -2 (x - c) / s^2 * exp(...)
    auto kernel_grad = [&](const Vec3& c) -> Vec3 {
      const Vec3 d = x - c;
      return (-2.0 * inv_sigma2 * std::exp(-d.squaredNorm() * inv_sigma2)) * d;
    };

    Vec3 g = upstream[home] * inv_count * kernel_grad(spec.center(home));
    // x also enters T(m) for every m that has `home` as a neighbour; the
    // relation is symmetric, so those m are exactly home's neighbours.
    const auto [i, j, k] = spec.unflatten(home);
    for_each_neighbor(spec, i, j, k, [&](std::size_t m) {
      const double w = upstream[m] / static_cast<double>(neighbor_count(m));
      if (w == 0.0) return;
      g += (w * inv_count) * kernel_grad(spec.center(m));
    });
    grads[p] = g;
  }, 1024);
  return grads;
}

std::vector<Vec3> soft_quantize_grad(const PointCloud& cloud, const VoxelGridSpec& spec,
                                     const DenseGrid& upstream) {
  return soft_quantize_grad(cloud.points, spec, upstream);
}

namespace {

struct AxisLayout {
  std::size_t outer;   // product of extents before the reduced axis
  std::size_t length;  // reduced extent
  std::size_t inner;   // product of extents after it
};

AxisLayout layout_for(const DenseGrid& t, std::size_t axis) {
  if (t.rank() != 3 || t.channels() != 1) {
    throw Error(ErrorCode::InvalidShape,
                "bev_flatten: expected [XxYxZ]x1 tensor, got " + t.shape_string());
  }
  if (axis > 2) throw Error(ErrorCode::InvalidIndex, "bev_flatten: axis must be 0..2", axis);
  AxisLayout l{1, t.extent(axis), 1};
  for (std::size_t a = 0; a < axis; ++a) l.outer *= t.extent(a);
  for (std::size_t a = axis + 1; a < 3; ++a) l.inner *= t.extent(a);
  return l;
}

DenseGrid bev_shape(const DenseGrid& t, std::size_t axis) {
  std::vector<std::int64_t> dims;
  for (std::size_t a = 0; a < 3; ++a) {
    if (a != axis) dims.push_back(static_cast<std::int64_t>(t.extent(a)));
  }
  return DenseGrid(dims, 1, 0.0);
}

std::size_t column_argmax(const DenseGrid& t, const AxisLayout& l, std::size_t o,
                          std::size_t in) {
  std::size_t best = 0;
  double best_v = t[o * l.length * l.inner + in];
  for (std::size_t h = 1; h < l.length; ++h) {
    const double v = t[(o * l.length + h) * l.inner + in];
    if (v > best_v) {
      best_v = v;
      best = h;
    }
  }
  return best;
}

}  // namespace

DenseGrid bev_flatten(const DenseGrid& tensor, BevMode mode, std::size_t axis) {
  const AxisLayout l = layout_for(tensor, axis);
  DenseGrid out = bev_shape(tensor, axis);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      double v = 0.0;
      if (mode == BevMode::max) {
        v = tensor[(o * l.length + column_argmax(tensor, l, o, in)) * l.inner + in];
      } else {
        for (std::size_t h = 0; h < l.length; ++h) v += tensor[(o * l.length + h) * l.inner + in];
      }
      out[o * l.inner + in] = v;
    }
  }
  return out;
}

DenseGrid bev_flatten_grad(const DenseGrid& tensor, BevMode mode, const DenseGrid& upstream,
                           std::size_t axis) {
  const AxisLayout l = layout_for(tensor, axis);
  if (!upstream.same_shape(bev_shape(tensor, axis))) {
    throw Error(ErrorCode::InvalidShape,
                "bev_flatten_grad: upstream " + upstream.shape_string() + " mismatch");
  }
  DenseGrid out = DenseGrid::like(tensor);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const double g = upstream[o * l.inner + in];
      if (mode == BevMode::max) {
        out[(o * l.length + column_argmax(tensor, l, o, in)) * l.inner + in] = g;
      } else {
        for (std::size_t h = 0; h < l.length; ++h) out[(o * l.length + h) * l.inner + in] = g;
      }
    }
  }
  return out;
}

}  // namespace plk
