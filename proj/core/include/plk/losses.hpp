#pragma once

#include <string_view>

#include "plk/grid.hpp"

namespace plk {

/// How per-pixel terms are reduced to a scalar.
enum class Reduction { mean, sum };

std::string_view to_string(Reduction r);
Reduction reduction_from_string(std::string_view s);

/// Edge-aware depth smoothness:
///   sum |dx D| exp(-|dx I|) + |dy D| exp(-|dy I|)
/// with forward differences and |dI| averaged over channels. In mean mode
/// each axis sum is divided by its number of difference terms.
/// map = per-pixel contribution, grad "depth".
GradPair smoothness_loss(const DenseGrid& depth, const DenseGrid& image,
                         Reduction reduction = Reduction::mean);

/// Masked L1 against projected LiDAR depth (0 = no return). Mean mode
/// divides by the number of LiDAR pixels; no LiDAR pixels gives 0.
/// map = per-pixel |D - D_hat| (0 off-mask), grad "pred".
GradPair supervised_depth_loss(const DenseGrid& pred, const DenseGrid& lidar,
                               Reduction reduction = Reduction::mean);

struct MdWeights {
  double lambda_m = 1.0;
  double lambda_d = 1.0;

  void validate() const;
};

/// Complementary combination of the self-supervised and supervised per-pixel
/// loss maps: pixels with a LiDAR return contribute lambda_d * L_D, all others
/// lambda_m * L_M. value = mean over all pixels; grad "l_m" and "l_d".
GradPair combined_md_loss(const DenseGrid& l_m_map, const DenseGrid& l_d_map,
                          const DenseGrid& lidar, const MdWeights& w);

/// -alpha_f (1 - p_t)^gamma ln(p_t), p_t = p for y = 1 and 1 - p for y = 0.
/// value = mean, grad "p".
GradPair focal_loss(const DenseGrid& p, const DenseGrid& y, double alpha_f = 0.25,
                    double gamma = 2.0);

/// 0.5 x^2 / beta for |x| < beta, |x| - 0.5 beta otherwise, x = pred - target.
/// value = mean, grad "pred".
GradPair smooth_l1(const DenseGrid& pred, const DenseGrid& target, double beta = 1.0 / 9.0);

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t count = 0;
};

/// Standard depth-evaluation metrics over pixels with gt > 0. Throws
/// EmptyGroundTruth when no pixel qualifies and InvalidDepth when a
/// prediction on the mask is not positive.
DepthMetrics depth_metrics(const DenseGrid& pred, const DenseGrid& gt);

/// Throws InvalidDepth unless every value is finite and >= 0.
void require_lidar(const DenseGrid& lidar);

}  // namespace plk
