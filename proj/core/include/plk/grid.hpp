#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace plk {

/// Dense row-major float container with 1-3 spatial extents and an
/// innermost channel axis. Images are [H, W] x C, occupation tensors
/// [X, Y, Z] x 1.
class DenseGrid {
 public:
  DenseGrid() = default;

  /// Throws InvalidShape when dims is empty, longer than 3, or any extent
  /// (or the channel count) is < 1.
  DenseGrid(std::vector<std::int64_t> dims, std::int64_t channels = 1,
            double fill = 0.0);

  static DenseGrid like(const DenseGrid& other, double fill = 0.0);

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t extent(std::size_t axis) const { return dims_.at(axis); }

  // Image conventions for rank-2 grids.
  std::size_t height() const { return dims_.at(0); }
  std::size_t width() const { return dims_.at(1); }
  std::size_t pixels() const noexcept { return channels_ ? data_.size() / channels_ : 0; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(std::size_t y, std::size_t x, std::size_t c = 0) {
    return data_[(y * dims_[1] + x) * channels_ + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return data_[(y * dims_[1] + x) * channels_ + c];
  }
  double& at3(std::size_t i, std::size_t j, std::size_t k, std::size_t c = 0) {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * channels_ + c];
  }
  double at3(std::size_t i, std::size_t j, std::size_t k, std::size_t c = 0) const {
    return data_[((i * dims_[1] + j) * dims_[2] + k) * channels_ + c];
  }

  bool same_shape(const DenseGrid& other) const noexcept {
    return dims_ == other.dims_ && channels_ == other.channels_;
  }
  /// Same leading (spatial) extents, channels may differ.
  bool same_extent(const DenseGrid& other) const noexcept { return dims_ == other.dims_; }

  std::string shape_string() const;

 private:
  std::vector<std::size_t> dims_;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

DenseGrid grid_new(std::vector<std::int64_t> dims, std::int64_t channels, double fill);

/// Throws InvalidShape unless a and b have the same dims and channels.
void require_same_shape(const DenseGrid& a, const DenseGrid& b, std::string_view what);
/// Throws InvalidShape unless a and b share spatial dims.
void require_same_extent(const DenseGrid& a, const DenseGrid& b, std::string_view what);
/// Throws InvalidShape unless g is rank 2 with the given channel count.
void require_image(const DenseGrid& g, std::size_t channels, std::string_view what);

bool all_finite(const DenseGrid& g);

/// Fixed-order pairwise summation. Used for every reduction so results do
/// not depend on how the preceding elementwise work was scheduled.
double pairwise_sum(std::span<const double> values);

// A scalar (optionally with a per-element map) and its gradients keyed by
// the name of the input they differentiate against.
struct GradPair {
  double value = 0.0;
  DenseGrid map;
  std::map<std::string, DenseGrid, std::less<>> grad;

  const DenseGrid& grad_wrt(std::string_view name) const;
};

using ScalarFn = std::function<double(const DenseGrid&)>;

/// Central differences, g[i] = (f(x + h_i e_i) - f(x - h_i e_i)) / (2 h_i)
/// with h_i = h * max(1, |x_i|). Throws OracleFailure (with the element
/// index) if f is non-finite at any probe.
DenseGrid finite_diff_grad(const ScalarFn& f, const DenseGrid& x, double h = 1e-5);

struct GradCheckReport {
  bool passed = true;
  std::size_t checked = 0;
  std::size_t failures = 0;
  std::size_t worst_index = 0;
  double max_abs_error = 0.0;
  /// max over elements of |a - n| / max(|a|, |n|); elements where both are
  /// below abs_tol count as zero.
  double max_rel_error = 0.0;
  /// max over elements of |a - n| / (abs_tol + rel_tol * max(|a|, |n|)).
  /// An element passes iff its ratio is <= 1.
  double worst_ratio = 0.0;
};

/// Per-element test |a - n| <= abs_tol + rel_tol * max(|a|, |n|). Elements
/// where `include` is present and zero are skipped.
GradCheckReport grad_check(const DenseGrid& analytic, const DenseGrid& numeric,
                           double rel_tol, double abs_tol,
                           const DenseGrid* include = nullptr);

}  // namespace plk
