#include "plk/losses.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "plk/error.hpp"

namespace plk {

std::string_view to_string(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

Reduction reduction_from_string(std::string_view s) {
  if (s == "mean") return Reduction::mean;
  if (s == "sum") return Reduction::sum;
  throw Error(ErrorCode::InvalidConfig, "reduction must be mean or sum, got '" + std::string(s) + "'");
}

void MdWeights::validate() const {
  if (!(lambda_m >= 0.0) || !(lambda_d >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "md weights must be >= 0");
  }
}

void require_lidar(const DenseGrid& lidar) {
  for (std::size_t i = 0; i < lidar.size(); ++i) {
    if (!(lidar[i] >= 0.0) || !std::isfinite(lidar[i])) {
      throw Error(ErrorCode::InvalidDepth, "lidar depth must be finite and >= 0", i);
    }
  }
}

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

GradPair smoothness_loss(const DenseGrid& depth, const DenseGrid& image, Reduction reduction) {
  require_image(depth, 1, "smoothness depth");
  if (image.rank() != 2 || !image.same_extent(depth)) {
    throw Error(ErrorCode::InvalidShape, "smoothness: image " + image.shape_string() +
                                             " does not match depth " + depth.shape_string());
  }
  const std::size_t H = depth.height();
  const std::size_t W = depth.width();
  const std::size_t C = image.channels();

  auto image_edge = [&](std::size_t p, std::size_t q) {
    double g = 0.0;
    for (std::size_t c = 0; c < C; ++c) g += std::abs(image[q * C + c] - image[p * C + c]);
    return g / static_cast<double>(C);
  };

  const std::size_t nx = H * (W - 1);
  const std::size_t ny = (H - 1) * W;
  double wx = 1.0;
  double wy = 1.0;
  if (reduction == Reduction::mean) {
    wx = nx > 0 ? 1.0 / static_cast<double>(nx) : 0.0;
    wy = ny > 0 ? 1.0 / static_cast<double>(ny) : 0.0;
  }

  GradPair out;
  out.map = DenseGrid::like(depth);
  DenseGrid grad = DenseGrid::like(depth);
  std::vector<double> terms;
  terms.reserve(nx + ny);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x + 1 < W; ++x) {
      const std::size_t p = y * W + x;
      const std::size_t q = p + 1;
      const double d = depth[q] - depth[p];
      const double e = std::exp(-image_edge(p, q));
      const double t = std::abs(d) * e;
      out.map[p] += t;
      terms.push_back(wx * t);
      const double g = wx * sign(d) * e;
      grad[q] += g;
      grad[p] -= g;
    }
  }
  for (std::size_t y = 0; y + 1 < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      const std::size_t p = y * W + x;
      const std::size_t q = p + W;
      const double d = depth[q] - depth[p];
      const double e = std::exp(-image_edge(p, q));
      const double t = std::abs(d) * e;
      out.map[p] += t;
      terms.push_back(wy * t);
      const double g = wy * sign(d) * e;
      grad[q] += g;
      grad[p] -= g;
    }
  }
  out.value = pairwise_sum(terms);
  out.grad.emplace("depth", std::move(grad));
  return out;
}

GradPair supervised_depth_loss(const DenseGrid& pred, const DenseGrid& lidar,
                               Reduction reduction) {
  require_same_shape(pred, lidar, "supervised_depth_loss");
  require_lidar(lidar);
  std::size_t count = 0;
  for (double v : lidar.values()) count += v > 0.0 ? 1 : 0;

  GradPair out;
  out.map = DenseGrid::like(pred);
  DenseGrid grad = DenseGrid::like(pred);
  if (count == 0) {
    out.grad.emplace("pred", std::move(grad));
    return out;
  }
  const double w = reduction == Reduction::mean ? 1.0 / static_cast<double>(count) : 1.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!(lidar[i] > 0.0)) continue;
    const double r = lidar[i] - pred[i];
    out.map[i] = std::abs(r);
    grad[i] = -w * sign(r);
  }
  out.value = w * pairwise_sum(out.map.values());
  out.grad.emplace("pred", std::move(grad));
  return out;
}

GradPair combined_md_loss(const DenseGrid& l_m_map, const DenseGrid& l_d_map,
                          const DenseGrid& lidar, const MdWeights& w) {
  w.validate();
  require_same_shape(l_m_map, l_d_map, "combined_md_loss maps");
  require_same_shape(l_m_map, lidar, "combined_md_loss lidar");
  require_lidar(lidar);
  const double inv_n = 1.0 / static_cast<double>(lidar.size());

  GradPair out;
  out.map = DenseGrid::like(lidar);
  DenseGrid g_m = DenseGrid::like(lidar);
  DenseGrid g_d = DenseGrid::like(lidar);
  for (std::size_t i = 0; i < lidar.size(); ++i) {
    if (lidar[i] > 0.0) {
      out.map[i] = w.lambda_d * l_d_map[i];
      g_d[i] = w.lambda_d * inv_n;
    } else {
      out.map[i] = w.lambda_m * l_m_map[i];
      g_m[i] = w.lambda_m * inv_n;
    }
  }
  out.value = pairwise_sum(out.map.values()) * inv_n;
  out.grad.emplace("l_m", std::move(g_m));
  out.grad.emplace("l_d", std::move(g_d));
  return out;
}

GradPair focal_loss(const DenseGrid& p, const DenseGrid& y, double alpha_f, double gamma) {
  require_same_shape(p, y, "focal_loss");
  if (!(alpha_f >= 0.0) || !(gamma >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "focal_loss: alpha_f and gamma must be >= 0");
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0 && p[i] < 1.0)) {
      throw Error(ErrorCode::InvalidProbability, "probability must lie in (0, 1)", i);
    }
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw Error(ErrorCode::InvalidProbability, "label must be 0 or 1", i);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(p.size());
  GradPair out;
  out.map = DenseGrid::like(p);
  DenseGrid grad = DenseGrid::like(p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool positive = y[i] == 1.0;
    const double pt = positive ? p[i] : 1.0 - p[i];
    const double log_pt = std::log(pt);
    const double focus = std::pow(1.0 - pt, gamma);
    out.map[i] = -alpha_f * focus * log_pt;
    // d/dpt = alpha (gamma (1-pt)^(gamma-1) ln pt - (1-pt)^gamma / pt)
    double d_pt = -alpha_f * focus / pt;
    if (gamma != 0.0) d_pt += alpha_f * gamma * std::pow(1.0 - pt, gamma - 1.0) * log_pt;
    grad[i] = (positive ? d_pt : -d_pt) * inv_n;
  }
  out.value = pairwise_sum(out.map.values()) * inv_n;
  out.grad.emplace("p", std::move(grad));
  return out;
}

GradPair smooth_l1(const DenseGrid& pred, const DenseGrid& target, double beta) {
  require_same_shape(pred, target, "smooth_l1");
  if (!(beta > 0.0)) throw Error(ErrorCode::InvalidConfig, "smooth_l1: beta must be > 0");
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  GradPair out;
  out.map = DenseGrid::like(pred);
  DenseGrid grad = DenseGrid::like(pred);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double x = pred[i] - target[i];
    if (std::abs(x) < beta) {
      out.map[i] = 0.5 * x * x / beta;
      grad[i] = x / beta * inv_n;
    } else {
      out.map[i] = std::abs(x) - 0.5 * beta;
      grad[i] = sign(x) * inv_n;
    }
  }
  out.value = pairwise_sum(out.map.values()) * inv_n;
  out.grad.emplace("pred", std::move(grad));
  return out;
}

DepthMetrics depth_metrics(const DenseGrid& pred, const DenseGrid& gt) {
  require_same_shape(pred, gt, "depth_metrics");
  require_lidar(gt);
  std::vector<double> abs_rel, sq_rel, sq, sq_log, d1, d2, d3;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double g = gt[i];
    if (!(g > 0.0)) continue;
    const double p = pred[i];
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw Error(ErrorCode::InvalidDepth, "depth_metrics: prediction must be > 0 on the mask", i);
    }
    const double diff = p - g;
    abs_rel.push_back(std::abs(diff) / g);
    sq_rel.push_back(diff * diff / g);
    sq.push_back(diff * diff);
    const double dl = std::log(p) - std::log(g);
    sq_log.push_back(dl * dl);
    const double ratio = std::max(p / g, g / p);
    d1.push_back(ratio < 1.25 ? 1.0 : 0.0);
    d2.push_back(ratio < 1.25 * 1.25 ? 1.0 : 0.0);
    d3.push_back(ratio < 1.25 * 1.25 * 1.25 ? 1.0 : 0.0);
  }
  if (abs_rel.empty()) {
    throw Error(ErrorCode::EmptyGroundTruth, "depth_metrics: no ground-truth pixel > 0");
  }
  const double n = static_cast<double>(abs_rel.size());
  DepthMetrics m;
  m.count = abs_rel.size();
  m.abs_rel = pairwise_sum(abs_rel) / n;
  m.sq_rel = pairwise_sum(sq_rel) / n;
  m.rmse = std::sqrt(pairwise_sum(sq) / n);
  m.rmse_log = std::sqrt(pairwise_sum(sq_log) / n);
  m.delta1 = pairwise_sum(d1) / n;
  m.delta2 = pairwise_sum(d2) / n;
  m.delta3 = pairwise_sum(d3) / n;
  return m;
}

}  // namespace plk
