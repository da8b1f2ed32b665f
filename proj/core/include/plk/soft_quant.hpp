#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "plk/camera.hpp"
#include "plk/grid.hpp"

namespace plk {

enum class Neighborhood { faces6, full26 };

std::string_view to_string(Neighborhood n);
Neighborhood neighborhood_from_string(std::string_view s);

/// Axis-aligned voxel grid. `origin` is the minimum corner; bin (i, j, k)
/// spans origin + [i, i+1) * bin_size.x etc. and is centred at
/// origin + (i + 0.5) * bin_size.
struct VoxelGridSpec {
  Vec3 origin = Vec3::Zero();
  Vec3 bin_size = Vec3::Ones();
  std::array<std::int64_t, 3> bins{1, 1, 1};
  double sigma = 1.0;
  Neighborhood neighborhood = Neighborhood::faces6;

  /// Mean bin edge length, the default kernel bandwidth.
  static double default_sigma(const Vec3& bin_size) { return bin_size.mean(); }

  void validate() const;
  std::size_t bin_count() const {
    return static_cast<std::size_t>(bins[0] * bins[1] * bins[2]);
  }
  std::size_t flat_index(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return static_cast<std::size_t>((i * bins[1] + j) * bins[2] + k);
  }
  std::array<std::int64_t, 3> unflatten(std::size_t m) const;
  Vec3 center(std::int64_t i, std::int64_t j, std::int64_t k) const;
  Vec3 center(std::size_t m) const;
};

/// Flat index of every bin adjacent to m under the grid's neighbourhood,
/// in a fixed order. Bins beyond the grid boundary are omitted.
std::vector<std::size_t> neighbor_bins(const VoxelGridSpec& spec, std::size_t m);

inline constexpr std::int64_t kOutsideGrid = -1;

/// Nearest-centre bin per point (ties toward the lower index on each axis),
/// or kOutsideGrid for points beyond the grid extent.
std::vector<std::int64_t> assign_bins(const PointCloud& cloud, const VoxelGridSpec& spec);
std::vector<std::int64_t> assign_bins(const std::vector<Vec3>& points,
                                      const VoxelGridSpec& spec);

/// Occupation tensor [X, Y, Z]:
///   T(m) = T(m, m) + 1/|N_m| * sum_{m' in N_m} T(m, m')
///   T(m, m') = mean_{p in P_m'} exp(-|p - c_m|^2 / sigma^2), or 0 if P_m' is empty.
DenseGrid soft_quantize(const PointCloud& cloud, const VoxelGridSpec& spec);
DenseGrid soft_quantize(const std::vector<Vec3>& points, const VoxelGridSpec& spec);

/// Gradient of sum(upstream * T) with respect to every point coordinate.
/// Bin assignment is held fixed; points outside the grid get zero.
std::vector<Vec3> soft_quantize_grad(const PointCloud& cloud, const VoxelGridSpec& spec,
                                     const DenseGrid& upstream);
std::vector<Vec3> soft_quantize_grad(const std::vector<Vec3>& points,
                                     const VoxelGridSpec& spec, const DenseGrid& upstream);

enum class BevMode { max, sum };

std::string_view to_string(BevMode m);
BevMode bev_mode_from_string(std::string_view s);

/// Reduces one axis of a rank-3 tensor (the last one by default). Max mode
/// picks the lowest index among ties.
DenseGrid bev_flatten(const DenseGrid& tensor, BevMode mode, std::size_t axis = 2);

/// Routes a BEV-shaped upstream gradient back to the tensor: to the arg-max
/// cell in max mode, to every cell of the column in sum mode.
DenseGrid bev_flatten_grad(const DenseGrid& tensor, BevMode mode, const DenseGrid& upstream,
                           std::size_t axis = 2);

}  // namespace plk
