#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "voleval/volgrid.hpp"

namespace voleval::bounds {

/// Relative volume prediction error pred/gt − 1. Throws std::domain_error unless gt > 0
/// and pred >= 0.
double vpe(double pred_volume, double gt_volume);

/// Interval of vpe values compatible with a Dice score.
struct VpeBounds {
  double lower = 0.0;  ///< 2/(2 − dice) − 2, never below −1
  double upper = 0.0;  ///< 2/dice − 2
};

/// Throws std::domain_error unless 0 < dice <= 1.
VpeBounds vpe_bounds_from_dice(double dice);

/// Cohort-level bound on mean |vpe| from the mean Dice: 2/mean_dice − 2.
/// Throws std::domain_error unless 0 < mean_dice <= 1.
double avpe_bound(double mean_dice);

/// One (pred, gt) pair whose vpe fell outside the interval implied by its Dice.
struct BoundViolation {
  std::uint64_t pred_bits = 0;  ///< enumeration only: mask bit patterns, voxel i = bit i
  std::uint64_t gt_bits = 0;
  double dice = 0.0;
  double vpe = 0.0;
  VpeBounds bounds;
};

struct ViolationReport {
  std::uint64_t pairs_checked = 0;
  /// Largest amount by which a vpe came closer than zero to a bound (negative = inside).
  double worst_margin = 0.0;
  std::vector<BoundViolation> violations;
  /// Pairs where |lower| > upper, i.e. the HM-GM consequence failed.
  std::uint64_t ordering_failures = 0;
};

/// Enumerates every (pred, gt) pair of binary masks on `dims` with non-empty gt and
/// non-zero overlap and checks lower <= vpe <= upper for each. Work is split over
/// `threads` ranges of pred patterns and merged in order.
/// Throws std::invalid_argument when the grid has more than `max_voxels` voxels
/// (hard ceiling 12).
ViolationReport verify_bounds_exhaustive(const Dims& dims, std::size_t max_voxels = 9,
                                         unsigned threads = 1);

/// Same check on `samples` random mask pairs with independent Bernoulli voxels whose
/// foreground rates are drawn per pair. Pairs with no overlap are redrawn.
ViolationReport verify_bounds_sampled(const Dims& dims, std::uint64_t samples, std::uint64_t seed);

/// Checks the bounds are attained by nested masks on an `n_voxels`-voxel line:
/// pred ⊂ gt reaches the lower bound, gt ⊂ pred the upper. Returns the largest absolute
/// gap between vpe and the bound it should meet.
double nested_bound_gap(std::size_t n_voxels);

struct CurveRow {
  double dice = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double abs_lower = 0.0;
  double abs_upper = 0.0;
};

std::vector<CurveRow> bound_curve(std::span<const double> dice_grid);

/// min, min + step, ... up to max (inclusive within step/1e6). Throws std::invalid_argument for
/// step <= 0, min <= 0, max > 1 or min > max.
std::vector<double> dice_range(double min, double max, double step);

/// `dice,vpe_lower,vpe_upper,abs_lower,abs_upper`, 6 significant digits.
void write_curve_csv(std::ostream& os, std::span<const CurveRow> rows);

/// Cohort view of the Dice/volume relationship.
struct CohortSummary {
  double mean_dice = 0.0;
  double mean_abs_vpe = 0.0;
  /// 2/mean_dice − 2; absent when mean_dice is 0.
  std::optional<double> avpe_bound;
  bool avpe_within_bound = false;
  /// mean over cases of 2/dice − 2; absent when any dice is 0. Always bounds mean_abs_vpe.
  std::optional<double> mean_case_upper;
  /// Per case: |vpe| above 2/dice − 2 (never expected for consistent inputs).
  std::vector<bool> case_violations;
};

/// Throws std::invalid_argument for empty or mismatched inputs.
CohortSummary summarize_cohort(std::span<const double> dice, std::span<const double> vpe);

}  // namespace voleval::bounds
