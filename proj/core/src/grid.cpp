#include "plk/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "plk/error.hpp"

namespace plk {

DenseGrid::DenseGrid(std::vector<std::int64_t> dims, std::int64_t channels, double fill) {
  if (dims.empty() || dims.size() > 3) {
    throw Error(ErrorCode::InvalidShape, "grid rank must be 1..3, got " +
                                             std::to_string(dims.size()));
  }
  if (channels < 1) {
    throw Error(ErrorCode::InvalidShape,
                "channel count must be >= 1, got " + std::to_string(channels));
  }
  std::size_t total = static_cast<std::size_t>(channels);
  dims_.reserve(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] < 1) {
      throw Error(ErrorCode::InvalidShape,
                  "extent must be >= 1, got " + std::to_string(dims[i]), i);
    }
    dims_.push_back(static_cast<std::size_t>(dims[i]));
    total *= dims_.back();
  }
  channels_ = static_cast<std::size_t>(channels);
  data_.assign(total, fill);
}

DenseGrid DenseGrid::like(const DenseGrid& other, double fill) {
  DenseGrid g;
  g.dims_ = other.dims_;
  g.channels_ = other.channels_;
  g.data_.assign(other.data_.size(), fill);
  return g;
}

std::string DenseGrid::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << "]x" << channels_;
  return os.str();
}

DenseGrid grid_new(std::vector<std::int64_t> dims, std::int64_t channels, double fill) {
  return DenseGrid(std::move(dims), channels, fill);
}

void require_same_shape(const DenseGrid& a, const DenseGrid& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::InvalidShape, std::string(what) + ": shape " + a.shape_string() +
                                             " vs " + b.shape_string());
  }
}

void require_same_extent(const DenseGrid& a, const DenseGrid& b, std::string_view what) {
  if (!a.same_extent(b)) {
    throw Error(ErrorCode::InvalidShape, std::string(what) + ": extent " + a.shape_string() +
                                             " vs " + b.shape_string());
  }
}

void require_image(const DenseGrid& g, std::size_t channels, std::string_view what) {
  if (g.rank() != 2 || g.channels() != channels) {
    throw Error(ErrorCode::InvalidShape, std::string(what) + ": expected [HxW]x" +
                                             std::to_string(channels) + ", got " +
                                             g.shape_string());
  }
}

bool all_finite(const DenseGrid& g) {
  return std::all_of(g.values().begin(), g.values().end(),
                     [](double v) { return std::isfinite(v); });
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 32;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

const DenseGrid& GradPair::grad_wrt(std::string_view name) const {
  auto it = grad.find(name);
  if (it == grad.end()) {
    throw Error(ErrorCode::InvalidIndex, "no gradient named '" + std::string(name) + "'");
  }
  return it->second;
}

DenseGrid finite_diff_grad(const ScalarFn& f, const DenseGrid& x, double h) {
  if (!(h > 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "finite-difference step must be > 0");
  }
  DenseGrid g = DenseGrid::like(x);
  DenseGrid probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double step = h * std::max(1.0, std::abs(xi));
    probe[i] = xi + step;
    const double fp = f(probe);
    probe[i] = xi - step;
    const double fm = f(probe);
    probe[i] = xi;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw Error(ErrorCode::OracleFailure, "function is non-finite near probe", i);
    }
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

GradCheckReport grad_check(const DenseGrid& analytic, const DenseGrid& numeric,
                           double rel_tol, double abs_tol, const DenseGrid* include) {
  require_same_shape(analytic, numeric, "grad_check");
  if (include != nullptr && include->size() != analytic.size()) {
    throw Error(ErrorCode::InvalidShape, "grad_check: include mask size mismatch");
  }
  GradCheckReport report;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (include != nullptr && (*include)[i] == 0.0) continue;
    ++report.checked;
    const double a = analytic[i];
    const double n = numeric[i];
    const double diff = std::abs(a - n);
    const double scale = std::max(std::abs(a), std::abs(n));
    const double ratio = diff / (abs_tol + rel_tol * scale);
    const double rel = scale > abs_tol ? diff / scale : 0.0;
    const bool ok = diff <= abs_tol + rel_tol * scale;
    if (!ok) ++report.failures;
    report.max_abs_error = std::max(report.max_abs_error, diff);
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (report.checked == 1 || ratio > report.worst_ratio) {
      report.worst_ratio = ratio;
      report.worst_index = i;
    }
  }
  report.passed = report.failures == 0;
  return report;
}

}  // namespace plk
