#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "voleval/linattn.hpp"

namespace voleval::attn {

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_error <= tolerance; }
};

/// Entrywise gradient error |analytic − numeric| / max(|analytic|, |numeric|, floor).
inline constexpr double kGradientErrorFloor = 1e-4;
double gradient_relative_error(double analytic, double numeric);

/// Central-difference derivative of `loss` with respect to every entry of `m`
/// (entries are perturbed in place and restored).
Matrix<double> numeric_gradient(Matrix<double>& m, const std::function<double()>& loss,
                                double step);

struct AttentionCheckOptions {
  std::size_t n = 64;
  std::size_t d = 16;
  std::uint64_t seed = 1;
  int trials = 10;
  /// Gradient checks use at most this many tokens and channels per trial; FD costs
  /// O(n·d) forward passes.
  std::size_t gradient_max_n = 8;
  std::size_t gradient_max_d = 4;
  GradientFault fault = GradientFault::none;
};

/// Runs the kernel property suite on random instances:
/// row_stochastic (1e-9), factored_vs_unfactored (1e-12), permutation_equivariance (1e-12),
/// convex_hull (1e-12) and gradient (1e-5, central differences with step 1e-5).
/// Throws std::invalid_argument for n > 4096 or n, d, trials < 1.
std::vector<CheckResult> run_attention_checks(const AttentionCheckOptions& options);

}  // namespace voleval::attn
