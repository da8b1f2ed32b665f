#include "plk/depth_param.hpp"

#include <cmath>

#include "plk/error.hpp"
#include "plk/parallel.hpp"

namespace plk {

void DepthParamConfig::validate() const {
  if (!(sigma_min > 0.0) || !(sigma_min < sigma_max) || !std::isfinite(sigma_max)) {
    throw Error(ErrorCode::InvalidConfig, "depth_param: need 0 < sigma_min < sigma_max");
  }
  if (!(d_prior > 0.0) || !std::isfinite(d_prior)) {
    throw Error(ErrorCode::InvalidConfig, "depth_param: d_prior must be > 0");
  }
}

namespace {

void require_disparity(const DenseGrid& x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] >= 0.0 && x[i] < 1.0)) {
      throw Error(ErrorCode::InvalidDisparity, "disparity must lie in [0, 1)", i);
    }
  }
}

}  // namespace

DenseGrid disparity_to_depth(const DenseGrid& x, const DepthParamConfig& cfg) {
  cfg.validate();
  require_disparity(x);
  DenseGrid out = DenseGrid::like(x);
  parallel_for(x.size(), [&](std::size_t i) { out[i] = cfg.depth(x[i]); }, 4096);
  return out;
}

DenseGrid disparity_to_depth_grad(const DenseGrid& x, const DepthParamConfig& cfg) {
  cfg.validate();
  require_disparity(x);
  DenseGrid out = DenseGrid::like(x);
  parallel_for(x.size(), [&](std::size_t i) { out[i] = cfg.depth_derivative(x[i]); }, 4096);
  return out;
}

}  // namespace plk
