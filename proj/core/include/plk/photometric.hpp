#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "plk/camera.hpp"
#include "plk/grid.hpp"

namespace plk {

struct SsimConfig {
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
  int window = 3;

  /// Throws InvalidConfig unless c1, c2 > 0 and window is odd and >= 3.
  void validate() const;
};

struct WarpResult {
  DenseGrid image;       // [H x W] x C, 0 where invalid
  DenseGrid valid_mask;  // [H x W] x 1, 1 where the sample landed inside the source
};

/// Where each target pixel lands in view n: lift with K^-1, scale by depth,
/// move by pose_t_to_n, project with K. Output is [H x W] x 2 holding (u, v);
/// pixels whose transformed z <= 0 get (-1, -1).
///
/// Evaluated as u' = u + f (d a1 + a0) / (d b1 + b0), the displacement form
/// of the same map, so an identity pose returns the pixel grid bit-exactly.
DenseGrid reproject_coords(const DenseGrid& depth, const PoseSE3& pose_t_to_n,
                           const CameraIntrinsics& cam);

/// d(u', v')/d(depth) per pixel, [H x W] x 2; zero at invalid pixels.
DenseGrid reproject_coords_grad(const DenseGrid& depth, const PoseSE3& pose_t_to_n,
                                const CameraIntrinsics& cam);

/// 4-tap bilinear sampling of src ([Hs x Ws] x C) at coords ([H x W] x 2).
/// Coordinates outside [0, Ws-1] x [0, Hs-1] yield 0 with mask 0.
WarpResult bilinear_sample(const DenseGrid& src, const DenseGrid& coords);

struct BilinearGrad {
  DenseGrid src;     // same shape as src
  DenseGrid coords;  // same shape as coords
};

/// Vector-Jacobian product of bilinear_sample for an upstream gradient on
/// the sampled image.
BilinearGrad bilinear_sample_grad(const DenseGrid& src, const DenseGrid& coords,
                                  const DenseGrid& upstream);

/// Per-pixel SSIM ([H x W] x 1), channels averaged. Windows are uniform and
/// cropped at the image border.
DenseGrid ssim(const DenseGrid& a, const DenseGrid& b, const SsimConfig& cfg);

/// Gradient of sum(upstream * ssim(a, b)) with respect to a. SSIM is
/// symmetric, so swap the arguments for the gradient with respect to b.
DenseGrid ssim_grad(const DenseGrid& a, const DenseGrid& b, const SsimConfig& cfg,
                    const DenseGrid& upstream);

/// pe = alpha/2 (1 - SSIM) + (1 - alpha) * mean_c |a - b| per pixel.
/// value = mean of pe over pixels where mask is 1 (all pixels if mask is
/// null); grad holds "a" and "b".
GradPair photometric_error(const DenseGrid& a, const DenseGrid& b, double alpha,
                           const SsimConfig& cfg, const DenseGrid* mask = nullptr);

/// Per-pixel pe map only.
DenseGrid photometric_error_map(const DenseGrid& a, const DenseGrid& b, double alpha,
                                const SsimConfig& cfg);

/// Gradient of sum(upstream * pe_map(a, b)) with respect to b.
DenseGrid photometric_error_grad_b(const DenseGrid& a, const DenseGrid& b, double alpha,
                                   const SsimConfig& cfg, const DenseGrid& upstream);

enum class ViewCombine { min, mean };

std::string_view to_string(ViewCombine c);
ViewCombine view_combine_from_string(std::string_view s);

struct PhotometricConfig {
  double alpha = 0.85;
  SsimConfig ssim;
  ViewCombine combine = ViewCombine::min;

  void validate() const;
};

struct SourceView {
  std::reference_wrapper<const DenseGrid> image;
  PoseSE3 pose_t_to_n;
};

/// Reconstructs the target frame from each source view through the depth
/// map and scores it with pe. Holds the forward intermediates so that
/// several upstream weightings can be pulled back to the depth map.
class ViewSynthesisLoss {
 public:
  ViewSynthesisLoss(const DenseGrid& target, std::vector<SourceView> sources,
                    const DenseGrid& depth, const CameraIntrinsics& cam,
                    const PhotometricConfig& cfg);

  /// Combined pe per pixel; 0 where no source view is valid.
  const DenseGrid& pe_map() const noexcept { return combined_; }
  /// 1 where at least one source view sampled inside its bounds.
  const DenseGrid& valid_mask() const noexcept { return valid_; }
  std::size_t valid_count() const noexcept { return valid_count_; }
  /// Mean of pe_map over valid pixels (0 if none).
  double mean() const noexcept { return mean_; }

  const WarpResult& warp(std::size_t view) const { return views_.at(view).warp; }
  const DenseGrid& coords(std::size_t view) const { return views_.at(view).coords; }

  /// d/d(depth) of sum(upstream * pe_map()). Source selection (min mode)
  /// and validity are held fixed.
  DenseGrid backward(const DenseGrid& upstream) const;
  /// d(mean())/d(depth).
  DenseGrid mean_gradient() const;

 private:
  struct View {
    DenseGrid image;
    PoseSE3 pose;
    DenseGrid coords;
    WarpResult warp;
    DenseGrid pe;
  };

  DenseGrid target_;
  DenseGrid depth_;
  CameraIntrinsics cam_;
  PhotometricConfig cfg_;
  std::vector<View> views_;
  DenseGrid combined_;
  DenseGrid valid_;
  std::vector<int> selected_;  // min mode: chosen view per pixel, -1 if none
  std::vector<int> valid_views_;
  std::size_t valid_count_ = 0;
  double mean_ = 0.0;
};

/// Self-supervised loss L_M: reconstruct I_t from the previous and next
/// frames and average the combined pe over valid pixels. grad holds "depth".
GradPair self_supervised_loss(const DenseGrid& image_t, const DenseGrid& image_prev,
                              const DenseGrid& image_next, const DenseGrid& depth,
                              const PoseSE3& pose_to_prev, const PoseSE3& pose_to_next,
                              const CameraIntrinsics& cam, const PhotometricConfig& cfg);

}  // namespace plk
