#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "plk/grid.hpp"

namespace plk {

inline constexpr double kGradcheckRelTol = 1e-4;
inline constexpr double kGradcheckAbsTol = 1e-7;

struct GradcheckTrial {
  std::uint64_t trial = 0;
  std::string wrt;  // input the worst element belongs to
  GradCheckReport report;
};

struct GradcheckResult {
  std::string op;
  std::size_t trials = 0;
  std::size_t failed_trials = 0;
  std::size_t elements_checked = 0;
  GradcheckTrial worst;  // trial with the largest worst_ratio
  bool passed() const noexcept { return failed_trials == 0; }
};

/// Every differentiable op covered by the suite, in a fixed order.
const std::vector<std::string>& gradcheck_op_names();

/// Runs `trials` seeded random instances of `op`, comparing analytic
/// gradients against central differences. Instances are small (at most
/// 16 x 12 pixels, 6^3 bins, 200 points) and keep clear of kinks: lattice
/// crossings, bin boundaries, |x| at 0 and min/max switches are excluded.
/// Throws InvalidConfig for an unknown op.
GradcheckResult run_gradcheck(std::string_view op, std::uint64_t seed, std::size_t trials);

}  // namespace plk
