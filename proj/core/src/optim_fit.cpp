#include "plk/optim_fit.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "plk/error.hpp"

namespace plk {

std::string_view to_string(SupervisionMode m) {
  switch (m) {
    case SupervisionMode::M: return "M";
    case SupervisionMode::D: return "D";
    case SupervisionMode::MD: return "MD";
  }
  return "M";
}

SupervisionMode supervision_mode_from_string(std::string_view s) {
  if (s == "M") return SupervisionMode::M;
  if (s == "D") return SupervisionMode::D;
  if (s == "MD") return SupervisionMode::MD;
  throw Error(ErrorCode::InvalidConfig, "mode must be M, D or MD, got '" + std::string(s) + "'");
}

void FitConfig::validate() const {
  if (steps < 1) throw Error(ErrorCode::InvalidConfig, "fit: steps must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::InvalidConfig, "fit: learning_rate must be >= 0");
  }
  if (!(smoothness_weight >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "fit: smoothness_weight must be >= 0");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "fit: adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw Error(ErrorCode::InvalidConfig, "fit: adam_eps must be > 0");
  if (!(init_jitter >= 0.0)) throw Error(ErrorCode::InvalidConfig, "fit: init_jitter must be >= 0");
  photometric.validate();
  md_weights.validate();
}

namespace {

bool has_lidar(const DenseGrid& lidar) {
  return std::any_of(lidar.values().begin(), lidar.values().end(),
                     [](double v) { return v > 0.0; });
}

ViewSynthesisLoss view_synthesis(const SyntheticScene& scene, const DenseGrid& depth,
                                 const FitConfig& fit) {
  return ViewSynthesisLoss(scene.image_t,
                           {SourceView{scene.image_prev, scene.pose_to_prev},
                            SourceView{scene.image_next, scene.pose_to_next}},
                           depth, scene.cam, fit.photometric);
}

// Adam state for a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t n, const FitConfig& cfg)
      : m_(n, 0.0), v_(n, 0.0), lr_(cfg.learning_rate), b1_(cfg.adam_beta1),
        b2_(cfg.adam_beta2), eps_(cfg.adam_eps) {}

  void step(std::vector<double>& params, const DenseGrid& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grad[i];
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * g * g;
      params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double lr_, b1_, b2_, eps_;
  std::int64_t t_ = 0;
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

ObjectiveValue fit_objective(const SyntheticScene& scene, const DenseGrid& depth,
                             const FitConfig& fit) {
  ObjectiveValue out;
  switch (fit.mode) {
    case SupervisionMode::M: {
      const ViewSynthesisLoss vs = view_synthesis(scene, depth, fit);
      out.data = vs.mean();
      out.grad_depth = vs.mean_gradient();
      break;
    }
    case SupervisionMode::D: {
      GradPair d = supervised_depth_loss(depth, scene.lidar, fit.supervised_reduction);
      out.data = d.value;
      out.grad_depth = std::move(d.grad.at("pred"));
      break;
    }
    case SupervisionMode::MD: {
      const ViewSynthesisLoss vs = view_synthesis(scene, depth, fit);
      const GradPair d = supervised_depth_loss(depth, scene.lidar, Reduction::sum);
      const GradPair md = combined_md_loss(vs.pe_map(), d.map, scene.lidar, fit.md_weights);
      out.data = md.value;
      out.grad_depth = vs.backward(md.grad_wrt("l_m"));
      // L_D's map is |D - D_hat| per pixel, so its pullback is pointwise.
      const DenseGrid& up_d = md.grad_wrt("l_d");
      const DenseGrid& d_grad = d.grad_wrt("pred");
      for (std::size_t i = 0; i < depth.size(); ++i) out.grad_depth[i] += up_d[i] * d_grad[i];
      break;
    }
  }
  out.total = out.data;
  if (fit.smoothness_weight > 0.0) {
    const GradPair s = smoothness_loss(depth, scene.image_t);
    out.smoothness = s.value;
    out.total += fit.smoothness_weight * s.value;
    const DenseGrid& g = s.grad_wrt("depth");
    for (std::size_t i = 0; i < depth.size(); ++i) {
      out.grad_depth[i] += fit.smoothness_weight * g[i];
    }
  }
  return out;
}

double initial_disparity(const DepthParamConfig& cfg) {
  cfg.validate();
  const double mid = 0.5 * (cfg.min_depth() + cfg.max_depth());
  return std::clamp(cfg.disparity_for(mid), 0.0, kMaxDisparity);
}

FitResult fit_depth(const SyntheticScene& scene, const DepthParamConfig& depth_cfg,
                    const FitConfig& fit) {
  depth_cfg.validate();
  fit.validate();
  if (fit.mode != SupervisionMode::M && !has_lidar(scene.lidar)) {
    throw Error(ErrorCode::EmptyGroundTruth, "fit: mode " + std::string(to_string(fit.mode)) +
                                                 " needs at least one LiDAR pixel");
  }

  const double x0 = initial_disparity(depth_cfg);
  DenseGrid x = DenseGrid::like(scene.gt_depth, x0);
  if (fit.init_jitter > 0.0) {
    std::mt19937_64 rng(fit.seed);
    std::uniform_real_distribution<double> noise(-fit.init_jitter, fit.init_jitter);
    for (double& v : x.values()) v = std::clamp(v + noise(rng), 0.0, kMaxDisparity);
  }

  // Optimized parameters: x itself, or z with x = kMaxDisparity * sigmoid(z).
  std::vector<double> params = x.values();
  if (fit.sigmoid_reparam) {
    for (double& v : params) {
      const double s = std::clamp(v / kMaxDisparity, 1e-12, 1.0 - 1e-12);
      v = std::log(s / (1.0 - s));
    }
  }

  Adam adam(params.size(), fit);
  FitResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(fit.steps));
  DenseGrid grad = DenseGrid::like(x);
  for (std::int64_t it = 0; it < fit.steps; ++it) {
    if (fit.sigmoid_reparam) {
      for (std::size_t i = 0; i < params.size(); ++i) x[i] = kMaxDisparity * sigmoid(params[i]);
    } else {
      x.values() = params;
    }
    const DenseGrid depth = disparity_to_depth(x, depth_cfg);
    const ObjectiveValue obj = fit_objective(scene, depth, fit);
    if (!std::isfinite(obj.total)) {
      throw Error(ErrorCode::DivergedFit, "fit: objective is not finite",
                  static_cast<std::size_t>(it));
    }
    result.loss_trace.push_back(obj.total);

    for (std::size_t i = 0; i < params.size(); ++i) {
      double g = obj.grad_depth[i] * depth_cfg.depth_derivative(x[i]);
      if (fit.sigmoid_reparam) {
        const double s = sigmoid(params[i]);
        g *= kMaxDisparity * s * (1.0 - s);
      }
      grad[i] = g;
    }
    adam.step(params, grad);
    if (!fit.sigmoid_reparam) {
      for (double& v : params) v = std::clamp(v, 0.0, kMaxDisparity);
    }
  }

  if (fit.sigmoid_reparam) {
    for (std::size_t i = 0; i < params.size(); ++i) x[i] = kMaxDisparity * sigmoid(params[i]);
  } else {
    x.values() = params;
  }
  result.disparity = x;
  result.depth = disparity_to_depth(x, depth_cfg);
  result.metrics = depth_metrics(result.depth, scene.gt_depth);
  result.median_abs_rel = median_abs_rel(result.depth, scene.gt_depth);
  return result;
}

namespace {

double median_of(std::vector<double> values) {
  const std::size_t n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

}  // namespace

double calibrate_prior(const DenseGrid& pred_depth, const DenseGrid& lidar) {
  require_same_shape(pred_depth, lidar, "calibrate_prior");
  require_lidar(lidar);
  std::vector<double> ratios;
  for (std::size_t i = 0; i < lidar.size(); ++i) {
    if (!(lidar[i] > 0.0)) continue;
    if (!(pred_depth[i] > 0.0)) {
      throw Error(ErrorCode::InvalidDepth, "calibrate_prior: prediction must be > 0", i);
    }
    ratios.push_back(lidar[i] / pred_depth[i]);
  }
  if (ratios.empty()) {
    throw Error(ErrorCode::EmptyGroundTruth, "calibrate_prior: no LiDAR pixel > 0");
  }
  return median_of(std::move(ratios));
}

double median_abs_rel(const DenseGrid& pred, const DenseGrid& gt) {
  require_same_shape(pred, gt, "median_abs_rel");
  std::vector<double> rel;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] > 0.0) rel.push_back(std::abs(pred[i] - gt[i]) / gt[i]);
  }
  if (rel.empty()) throw Error(ErrorCode::EmptyGroundTruth, "median_abs_rel: empty mask");
  return median_of(std::move(rel));
}

}  // namespace plk
