#include "plk/photometric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plk/error.hpp"
#include "plk/parallel.hpp"

namespace plk {

void SsimConfig::validate() const {
  if (!(c1 > 0.0) || !(c2 > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "ssim: c1 and c2 must be > 0");
  }
  if (window < 3 || window % 2 == 0) {
    throw Error(ErrorCode::InvalidConfig, "ssim: window must be odd and >= 3");
  }
}

std::string_view to_string(ViewCombine c) { return c == ViewCombine::min ? "min" : "mean"; }

ViewCombine view_combine_from_string(std::string_view s) {
  if (s == "min") return ViewCombine::min;
  if (s == "mean") return ViewCombine::mean;
  throw Error(ErrorCode::InvalidConfig, "combine must be min or mean, got '" + std::string(s) + "'");
}

void PhotometricConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "photometric: alpha must lie in [0, 1]");
  }
  ssim.validate();
}

namespace {

void require_positive_depth(const DenseGrid& depth) {
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!(depth[i] > 0.0) || !std::isfinite(depth[i])) {
      throw Error(ErrorCode::InvalidDepth, "depth must be finite and > 0", i);
    }
  }
}

void require_depth_for_camera(const DenseGrid& depth, const CameraIntrinsics& cam) {
  cam.validate();
  require_image(depth, 1, "depth");
  if (depth.height() != static_cast<std::size_t>(cam.height) ||
      depth.width() != static_cast<std::size_t>(cam.width)) {
    throw Error(ErrorCode::InvalidShape, "depth " + depth.shape_string() +
                                             " does not match camera extents");
  }
  require_positive_depth(depth);
}

// Per-pixel affine coefficients of the displacement form of the reprojection:
//   u' = u + f (d a1 + a0) / (d b1 + b0),  v' = v + f (d c1 + c0) / (d b1 + b0)
struct ReprojCoeffs {
  double a1, a0, c1, c0, b1, b0;
};

ReprojCoeffs reproj_coeffs(double u, double v, const Mat3& r_minus_i, const Vec3& t,
                           const CameraIntrinsics& cam) {
  const Vec3 ray((u - cam.cx) / cam.f, (v - cam.cy) / cam.f, 1.0);
  const Vec3 q = r_minus_i * ray;
  return {q.x() - ray.x() * q.z(), t.x() - ray.x() * t.z(),
          q.y() - ray.y() * q.z(), t.y() - ray.y() * t.z(),
          1.0 + q.z(),             t.z()};
}

struct Window {
  std::size_t y0, y1, x0, x1;  // inclusive
  double count() const { return static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1)); }
};

Window window_at(std::size_t y, std::size_t x, std::size_t H, std::size_t W, std::size_t r) {
  return {y >= r ? y - r : 0, std::min(H - 1, y + r), x >= r ? x - r : 0, std::min(W - 1, x + r)};
}

struct WindowStats {
  double mu_a, mu_b, var_a, var_b, cov, n;
};

WindowStats window_stats(const DenseGrid& a, const DenseGrid& b, const Window& w,
                         std::size_t c) {
  WindowStats s{0, 0, 0, 0, 0, w.count()};
  for (std::size_t y = w.y0; y <= w.y1; ++y)
    for (std::size_t x = w.x0; x <= w.x1; ++x) {
      s.mu_a += a.at(y, x, c);
      s.mu_b += b.at(y, x, c);
    }
  s.mu_a /= s.n;
  s.mu_b /= s.n;
  for (std::size_t y = w.y0; y <= w.y1; ++y)
    for (std::size_t x = w.x0; x <= w.x1; ++x) {
      const double da = a.at(y, x, c) - s.mu_a;
      const double db = b.at(y, x, c) - s.mu_b;
      s.var_a += da * da;
      s.var_b += db * db;
      s.cov += da * db;
    }
  s.var_a /= s.n;
  s.var_b /= s.n;
  s.cov /= s.n;
  return s;
}

void require_ssim_inputs(const DenseGrid& a, const DenseGrid& b, const SsimConfig& cfg) {
  cfg.validate();
  if (a.rank() != 2) {
    throw Error(ErrorCode::InvalidShape, "ssim: expected [HxW]xC images, got " + a.shape_string());
  }
  require_same_shape(a, b, "ssim");
}

}  // namespace

DenseGrid reproject_coords(const DenseGrid& depth, const PoseSE3& pose_t_to_n,
                           const CameraIntrinsics& cam) {
  require_depth_for_camera(depth, cam);
  pose_t_to_n.validate();
  const std::size_t H = depth.height();
  const std::size_t W = depth.width();
  const Mat3 r_minus_i = pose_t_to_n.R - Mat3::Identity();
  DenseGrid out({static_cast<std::int64_t>(H), static_cast<std::int64_t>(W)}, 2, 0.0);
  parallel_for(H * W, [&](std::size_t p) {
    const std::size_t v = p / W;
    const std::size_t u = p % W;
    const double uf = static_cast<double>(u);
    const double vf = static_cast<double>(v);
    const ReprojCoeffs k = reproj_coeffs(uf, vf, r_minus_i, pose_t_to_n.t, cam);
    const double d = depth[p];
    const double z = d * k.b1 + k.b0;
    if (!(z > 0.0)) {
      out[2 * p] = -1.0;
      out[2 * p + 1] = -1.0;
      return;
    }
    out[2 * p] = uf + cam.f * (d * k.a1 + k.a0) / z;
    out[2 * p + 1] = vf + cam.f * (d * k.c1 + k.c0) / z;
  }, 512);
  return out;
}

DenseGrid reproject_coords_grad(const DenseGrid& depth, const PoseSE3& pose_t_to_n,
                                const CameraIntrinsics& cam) {
  require_depth_for_camera(depth, cam);
  pose_t_to_n.validate();
  const std::size_t H = depth.height();
  const std::size_t W = depth.width();
  const Mat3 r_minus_i = pose_t_to_n.R - Mat3::Identity();
  DenseGrid out({static_cast<std::int64_t>(H), static_cast<std::int64_t>(W)}, 2, 0.0);
  parallel_for(H * W, [&](std::size_t p) {
    const ReprojCoeffs k = reproj_coeffs(static_cast<double>(p % W),
                                         static_cast<double>(p / W), r_minus_i,
                                         pose_t_to_n.t, cam);
    const double d = depth[p];
    const double z = d * k.b1 + k.b0;
    if (!(z > 0.0)) return;
    // d/dd (d a1 + a0) / (d b1 + b0) = (a1 b0 - a0 b1) / z^2
    out[2 * p] = cam.f * (k.a1 * k.b0 - k.a0 * k.b1) / (z * z);
    out[2 * p + 1] = cam.f * (k.c1 * k.b0 - k.c0 * k.b1) / (z * z);
  }, 512);
  return out;
}

namespace {

struct Taps {
  std::size_t x0, x1, y0, y1;
  double fx, fy;
};

// False when (x, y) falls outside [0, W-1] x [0, H-1]. At the far edge the
// lower tap is pulled in so that both taps stay inside the image.
bool bilinear_taps(double x, double y, std::size_t W, std::size_t H, Taps& t) {
  if (!(x >= 0.0 && x <= static_cast<double>(W - 1) && y >= 0.0 &&
        y <= static_cast<double>(H - 1))) {
    return false;
  }
  const auto clamp_low = [](double c, std::size_t n) {
    const auto i = static_cast<std::size_t>(std::floor(c));
    return n >= 2 ? std::min(i, n - 2) : std::size_t{0};
  };
  t.x0 = clamp_low(x, W);
  t.y0 = clamp_low(y, H);
  t.x1 = std::min(t.x0 + 1, W - 1);
  t.y1 = std::min(t.y0 + 1, H - 1);
  t.fx = x - static_cast<double>(t.x0);
  t.fy = y - static_cast<double>(t.y0);
  return true;
}

void require_coords(const DenseGrid& src, const DenseGrid& coords) {
  if (src.rank() != 2) {
    throw Error(ErrorCode::InvalidShape, "bilinear_sample: src must be [HxW]xC, got " +
                                             src.shape_string());
  }
  require_image(coords, 2, "bilinear_sample coords");
}

// Coordinate part of the bilinear VJP only.
DenseGrid bilinear_coords_grad(const DenseGrid& src, const DenseGrid& coords,
                               const DenseGrid& upstream) {
  const std::size_t Hs = src.height();
  const std::size_t Ws = src.width();
  const std::size_t C = src.channels();
  DenseGrid out = DenseGrid::like(coords);
  parallel_for(coords.pixels(), [&](std::size_t p) {
    Taps t;
    if (!bilinear_taps(coords[2 * p], coords[2 * p + 1], Ws, Hs, t)) return;
    double gx = 0.0;
    double gy = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double g = upstream[p * C + c];
      if (g == 0.0) continue;
      const double v00 = src.at(t.y0, t.x0, c);
      const double v01 = src.at(t.y0, t.x1, c);
      const double v10 = src.at(t.y1, t.x0, c);
      const double v11 = src.at(t.y1, t.x1, c);
      gx += g * ((1.0 - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
      gy += g * ((1.0 - t.fx) * (v10 - v00) + t.fx * (v11 - v01));
    }
    out[2 * p] = gx;
    out[2 * p + 1] = gy;
  }, 512);
  return out;
}

}  // namespace

WarpResult bilinear_sample(const DenseGrid& src, const DenseGrid& coords) {
  require_coords(src, coords);
  const std::size_t Hs = src.height();
  const std::size_t Ws = src.width();
  const std::size_t C = src.channels();
  const auto H = static_cast<std::int64_t>(coords.height());
  const auto W = static_cast<std::int64_t>(coords.width());
  WarpResult out{DenseGrid({H, W}, static_cast<std::int64_t>(C), 0.0), DenseGrid({H, W}, 1, 0.0)};
  parallel_for(coords.pixels(), [&](std::size_t p) {
    Taps t;
    if (!bilinear_taps(coords[2 * p], coords[2 * p + 1], Ws, Hs, t)) return;
    const double w00 = (1.0 - t.fx) * (1.0 - t.fy);
    const double w01 = t.fx * (1.0 - t.fy);
    const double w10 = (1.0 - t.fx) * t.fy;
    const double w11 = t.fx * t.fy;
    for (std::size_t c = 0; c < C; ++c) {
      out.image[p * C + c] = w00 * src.at(t.y0, t.x0, c) + w01 * src.at(t.y0, t.x1, c) +
                             w10 * src.at(t.y1, t.x0, c) + w11 * src.at(t.y1, t.x1, c);
    }
    out.valid_mask[p] = 1.0;
  }, 512);
  return out;
}

BilinearGrad bilinear_sample_grad(const DenseGrid& src, const DenseGrid& coords,
                                  const DenseGrid& upstream) {
  require_coords(src, coords);
  const std::size_t C = src.channels();
  if (upstream.rank() != 2 || upstream.height() != coords.height() ||
      upstream.width() != coords.width() || upstream.channels() != C) {
    throw Error(ErrorCode::InvalidShape, "bilinear_sample_grad: upstream " +
                                             upstream.shape_string() + " mismatch");
  }
  BilinearGrad out{DenseGrid::like(src), bilinear_coords_grad(src, coords, upstream)};
  const std::size_t Hs = src.height();
  const std::size_t Ws = src.width();
  // Scatter into src; sequential to keep the accumulation order fixed.
  for (std::size_t p = 0; p < coords.pixels(); ++p) {
    Taps t;
    if (!bilinear_taps(coords[2 * p], coords[2 * p + 1], Ws, Hs, t)) continue;
    const double w00 = (1.0 - t.fx) * (1.0 - t.fy);
    const double w01 = t.fx * (1.0 - t.fy);
    const double w10 = (1.0 - t.fx) * t.fy;
    const double w11 = t.fx * t.fy;
    for (std::size_t c = 0; c < C; ++c) {
      const double g = upstream[p * C + c];
      out.src.at(t.y0, t.x0, c) += w00 * g;
      out.src.at(t.y0, t.x1, c) += w01 * g;
      out.src.at(t.y1, t.x0, c) += w10 * g;
      out.src.at(t.y1, t.x1, c) += w11 * g;
    }
  }
  return out;
}

DenseGrid ssim(const DenseGrid& a, const DenseGrid& b, const SsimConfig& cfg) {
  require_ssim_inputs(a, b, cfg);
  const std::size_t H = a.height();
  const std::size_t W = a.width();
  const std::size_t C = a.channels();
  const auto r = static_cast<std::size_t>(cfg.window / 2);
  DenseGrid out({static_cast<std::int64_t>(H), static_cast<std::int64_t>(W)}, 1, 0.0);
  parallel_for(H * W, [&](std::size_t p) {
    const Window w = window_at(p / W, p % W, H, W, r);
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const WindowStats s = window_stats(a, b, w, c);
      const double num = (2.0 * s.mu_a * s.mu_b + cfg.c1) * (2.0 * s.cov + cfg.c2);
      const double den = (s.mu_a * s.mu_a + s.mu_b * s.mu_b + cfg.c1) *
                         (s.var_a + s.var_b + cfg.c2);
      acc += num / den;
    }
    out[p] = acc / static_cast<double>(C);
  }, 256);
  return out;
}

DenseGrid ssim_grad(const DenseGrid& a, const DenseGrid& b, const SsimConfig& cfg,
                    const DenseGrid& upstream) {
  require_ssim_inputs(a, b, cfg);
  const std::size_t H = a.height();
  const std::size_t W = a.width();
  const std::size_t C = a.channels();
  if (upstream.rank() != 2 || upstream.height() != H || upstream.width() != W ||
      upstream.channels() != 1) {
    throw Error(ErrorCode::InvalidShape, "ssim_grad: upstream " + upstream.shape_string() +
                                             " mismatch");
  }
  const auto r = static_cast<std::size_t>(cfg.window / 2);

  // dS_q/da_i = alpha_q + beta_q a_i + gamma_q b_i for i in window(q).
  std::vector<double> coef_alpha(H * W * C, 0.0);
  std::vector<double> coef_beta(H * W * C, 0.0);
  std::vector<double> coef_gamma(H * W * C, 0.0);
  parallel_for(H * W, [&](std::size_t p) {
    const double up = upstream[p];
    if (up == 0.0) return;
    const Window w = window_at(p / W, p % W, H, W, r);
    for (std::size_t c = 0; c < C; ++c) {
      const WindowStats s = window_stats(a, b, w, c);
      const double A1 = 2.0 * s.mu_a * s.mu_b + cfg.c1;
      const double A2 = 2.0 * s.cov + cfg.c2;
      const double B1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + cfg.c1;
      const double B2 = s.var_a + s.var_b + cfg.c2;
      const double S = (A1 * A2) / (B1 * B2);
      const double dS_dmu = 2.0 * s.mu_b * A2 / (B1 * B2) - 2.0 * s.mu_a * S / B1;
      const double dS_dcov = 2.0 * A1 / (B1 * B2);
      const double dS_dvar = -S / B2;
      const double scale = up / (static_cast<double>(C) * s.n);
      coef_alpha[p * C + c] = scale * (dS_dmu - 2.0 * s.mu_a * dS_dvar - s.mu_b * dS_dcov);
      coef_beta[p * C + c] = scale * 2.0 * dS_dvar;
      coef_gamma[p * C + c] = scale * dS_dcov;
    }
  }, 256);

  // Windows are symmetric: i is in window(q) iff q is in window(i).
  DenseGrid out = DenseGrid::like(a);
  parallel_for(H * W, [&](std::size_t p) {
    const Window w = window_at(p / W, p % W, H, W, r);
    for (std::size_t c = 0; c < C; ++c) {
      const double ai = a[p * C + c];
      const double bi = b[p * C + c];
      double g = 0.0;
      for (std::size_t y = w.y0; y <= w.y1; ++y)
        for (std::size_t x = w.x0; x <= w.x1; ++x) {
          const std::size_t q = (y * W + x) * C + c;
          g += coef_alpha[q] + coef_beta[q] * ai + coef_gamma[q] * bi;
        }
      out[p * C + c] = g;
    }
  }, 256);
  return out;
}

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// d/dx of sum(upstream * pe(x, y)) with x in the first slot. pe is symmetric
// in its arguments so this serves both directions.
DenseGrid pe_grad_first(const DenseGrid& x, const DenseGrid& y, double alpha,
                        const SsimConfig& cfg, const DenseGrid& upstream) {
  DenseGrid g = ssim_grad(x, y, cfg, upstream);
  const std::size_t C = x.channels();
  const double l1_scale = (1.0 - alpha) / static_cast<double>(C);
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t i = p * C + c;
      g[i] = -0.5 * alpha * g[i] + l1_scale * sign(x[i] - y[i]) * upstream[p];
    }
  }
  return g;
}

}  // namespace

DenseGrid photometric_error_map(const DenseGrid& a, const DenseGrid& b, double alpha,
                                const SsimConfig& cfg) {
  DenseGrid s = ssim(a, b, cfg);
  const std::size_t C = a.channels();
  for (std::size_t p = 0; p < s.size(); ++p) {
    double l1 = 0.0;
    for (std::size_t c = 0; c < C; ++c) l1 += std::abs(a[p * C + c] - b[p * C + c]);
    s[p] = 0.5 * alpha * (1.0 - s[p]) + (1.0 - alpha) * (l1 / static_cast<double>(C));
  }
  return s;
}

DenseGrid photometric_error_grad_b(const DenseGrid& a, const DenseGrid& b, double alpha,
                                   const SsimConfig& cfg, const DenseGrid& upstream) {
  return pe_grad_first(b, a, alpha, cfg, upstream);
}

GradPair photometric_error(const DenseGrid& a, const DenseGrid& b, double alpha,
                           const SsimConfig& cfg, const DenseGrid* mask) {
  GradPair out;
  out.map = photometric_error_map(a, b, alpha, cfg);
  DenseGrid weights = DenseGrid::like(out.map, 1.0);
  if (mask != nullptr) {
    require_same_shape(out.map, *mask, "photometric_error mask");
    weights = *mask;
  }
  const double count = pairwise_sum(weights.values());
  if (count > 0.0) {
    for (double& w : weights.values()) w /= count;
  }
  std::vector<double> terms(out.map.size());
  for (std::size_t p = 0; p < terms.size(); ++p) terms[p] = weights[p] * out.map[p];
  out.value = pairwise_sum(terms);
  out.grad.emplace("a", pe_grad_first(a, b, alpha, cfg, weights));
  out.grad.emplace("b", pe_grad_first(b, a, alpha, cfg, weights));
  return out;
}

ViewSynthesisLoss::ViewSynthesisLoss(const DenseGrid& target, std::vector<SourceView> sources,
                                     const DenseGrid& depth, const CameraIntrinsics& cam,
                                     const PhotometricConfig& cfg)
    : target_(target), depth_(depth), cam_(cam), cfg_(cfg) {
  cfg_.validate();
  require_depth_for_camera(depth_, cam_);
  if (target_.rank() != 2 || !target_.same_extent(depth_)) {
    throw Error(ErrorCode::InvalidShape, "view synthesis: target " + target_.shape_string() +
                                             " does not match depth " + depth_.shape_string());
  }
  if (sources.empty()) {
    throw Error(ErrorCode::InvalidConfig, "view synthesis: need at least one source view");
  }
  for (const SourceView& s : sources) {
    require_same_shape(target_, s.image.get(), "view synthesis source");
    View v{s.image.get(), s.pose_t_to_n, {}, {}, {}};
    v.coords = reproject_coords(depth_, v.pose, cam_);
    v.warp = bilinear_sample(v.image, v.coords);
    v.pe = photometric_error_map(target_, v.warp.image, cfg_.alpha, cfg_.ssim);
    views_.push_back(std::move(v));
  }

  const std::size_t P = depth_.size();
  combined_ = DenseGrid::like(depth_);
  valid_ = DenseGrid::like(depth_);
  selected_.assign(P, -1);
  valid_views_.assign(P, 0);
  for (std::size_t p = 0; p < P; ++p) {
    double best = 0.0;
    double total = 0.0;
    int count = 0;
    for (std::size_t n = 0; n < views_.size(); ++n) {
      if (views_[n].warp.valid_mask[p] == 0.0) continue;
      const double e = views_[n].pe[p];
      if (count == 0 || e < best) {
        best = e;
        selected_[p] = static_cast<int>(n);
      }
      total += e;
      ++count;
    }
    valid_views_[p] = count;
    if (count == 0) continue;
    valid_[p] = 1.0;
    combined_[p] = cfg_.combine == ViewCombine::min ? best : total / count;
  }
  valid_count_ = static_cast<std::size_t>(pairwise_sum(valid_.values()));
  mean_ = valid_count_ > 0
              ? pairwise_sum(combined_.values()) / static_cast<double>(valid_count_)
              : 0.0;
}

DenseGrid ViewSynthesisLoss::backward(const DenseGrid& upstream) const {
  require_same_shape(upstream, depth_, "view synthesis upstream");
  const std::size_t P = depth_.size();
  DenseGrid grad = DenseGrid::like(depth_);
  for (std::size_t n = 0; n < views_.size(); ++n) {
    const View& v = views_[n];
    DenseGrid up = DenseGrid::like(depth_);
    bool any = false;
    for (std::size_t p = 0; p < P; ++p) {
      if (valid_views_[p] == 0 || v.warp.valid_mask[p] == 0.0 || upstream[p] == 0.0) continue;
      if (cfg_.combine == ViewCombine::min) {
        if (selected_[p] != static_cast<int>(n)) continue;
        up[p] = upstream[p];
      } else {
        up[p] = upstream[p] / valid_views_[p];
      }
      any = true;
    }
    if (!any) continue;

    DenseGrid g_img = photometric_error_grad_b(target_, v.warp.image, cfg_.alpha, cfg_.ssim, up);
    // Invalid warped pixels are constant zeros; nothing flows through them.
    const std::size_t C = g_img.channels();
    for (std::size_t p = 0; p < P; ++p) {
      if (v.warp.valid_mask[p] == 0.0) {
        for (std::size_t c = 0; c < C; ++c) g_img[p * C + c] = 0.0;
      }
    }
    const DenseGrid g_coords = bilinear_coords_grad(v.image, v.coords, g_img);
    const DenseGrid j = reproject_coords_grad(depth_, v.pose, cam_);
    for (std::size_t p = 0; p < P; ++p) {
      grad[p] += j[2 * p] * g_coords[2 * p] + j[2 * p + 1] * g_coords[2 * p + 1];
    }
  }
  return grad;
}

DenseGrid ViewSynthesisLoss::mean_gradient() const {
  DenseGrid up = valid_;
  if (valid_count_ > 0) {
    for (double& w : up.values()) w /= static_cast<double>(valid_count_);
  }
  return backward(up);
}

GradPair self_supervised_loss(const DenseGrid& image_t, const DenseGrid& image_prev,
                              const DenseGrid& image_next, const DenseGrid& depth,
                              const PoseSE3& pose_to_prev, const PoseSE3& pose_to_next,
                              const CameraIntrinsics& cam, const PhotometricConfig& cfg) {
  const ViewSynthesisLoss loss(image_t,
                               {SourceView{image_prev, pose_to_prev},
                                SourceView{image_next, pose_to_next}},
                               depth, cam, cfg);
  GradPair out;
  out.value = loss.mean();
  out.map = loss.pe_map();
  out.grad.emplace("depth", loss.mean_gradient());
  return out;
}

}  // namespace plk
