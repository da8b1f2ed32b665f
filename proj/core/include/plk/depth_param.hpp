#pragma once

#include "plk/grid.hpp"

namespace plk {

/// Scale-aware disparity -> depth mapping
///
///   depth = d_prior / (sigma_min + (sigma_max - sigma_min) * x),  x in [0, 1)
///
/// The disparity bounds pin depths to (d_prior / sigma_max, d_prior / sigma_min];
/// d_prior carries the absolute scale.
struct DepthParamConfig {
  double sigma_min = 0.01;
  double sigma_max = 10.0;
  double d_prior = 1.0;

  /// Throws InvalidConfig unless 0 < sigma_min < sigma_max and d_prior > 0.
  void validate() const;

  /// depth at x = 0, the largest reachable depth.
  double max_depth() const { return d_prior * (1.0 / sigma_min); }
  /// Infimum of the depth range (reached only in the limit x -> 1).
  double min_depth() const { return d_prior * (1.0 / sigma_max); }

  double depth(double x) const {
    return d_prior * (1.0 / (sigma_min + (sigma_max - sigma_min) * x));
  }
  double depth_derivative(double x) const {
    const double denom = sigma_min + (sigma_max - sigma_min) * x;
    return -d_prior * (sigma_max - sigma_min) / (denom * denom);
  }
  /// Inverse map; the result may fall outside [0, 1) for unreachable depths.
  double disparity_for(double depth) const {
    return (d_prior / depth - sigma_min) / (sigma_max - sigma_min);
  }
};

/// Elementwise map of a disparity grid. Throws InvalidDisparity (with the
/// offending index) for any element outside [0, 1).
DenseGrid disparity_to_depth(const DenseGrid& x, const DepthParamConfig& cfg);

/// Elementwise d(depth)/dx, strictly negative.
DenseGrid disparity_to_depth_grad(const DenseGrid& x, const DepthParamConfig& cfg);

}  // namespace plk
