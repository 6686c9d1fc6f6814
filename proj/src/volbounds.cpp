#include "voleval/volbounds.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "voleval/segmetrics.hpp"

namespace voleval::bounds {

namespace {

// Floating slack for comparisons that are equalities in exact arithmetic (nested masks).
constexpr double kSlack = 1e-12;

struct PairCheck {
  double dice;
  double vpe;
  VpeBounds bounds;
  double margin;  // > 0 means outside the interval
};

PairCheck check_counts(std::uint64_t pred, std::uint64_t gt, std::uint64_t overlap) {
  const double dice = 2.0 * static_cast<double>(overlap) / static_cast<double>(pred + gt);
  const double err = vpe(static_cast<double>(pred), static_cast<double>(gt));
  const VpeBounds b = vpe_bounds_from_dice(dice);
  const double margin = std::max(b.lower - err, err - b.upper);
  return {dice, err, b, margin};
}

void record(ViolationReport& report, const PairCheck& c, std::uint64_t pred_bits,
            std::uint64_t gt_bits) {
  ++report.pairs_checked;
  report.worst_margin = std::max(report.worst_margin, c.margin);
  if (c.margin > kSlack * (1.0 + std::abs(c.vpe))) {
    report.violations.push_back({pred_bits, gt_bits, c.dice, c.vpe, c.bounds});
  }
  if (-c.bounds.lower > c.bounds.upper + kSlack) {
    ++report.ordering_failures;
  }
}

ViolationReport enumerate_range(std::uint64_t pred_begin, std::uint64_t pred_end,
                                std::uint64_t patterns) {
  ViolationReport report;
  report.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::uint64_t p = pred_begin; p < pred_end; ++p) {
    const auto pred_count = static_cast<std::uint64_t>(std::popcount(p));
    for (std::uint64_t g = 1; g < patterns; ++g) {
      const auto overlap = static_cast<std::uint64_t>(std::popcount(p & g));
      if (overlap == 0) {
        continue;
      }
      const auto gt_count = static_cast<std::uint64_t>(std::popcount(g));
      record(report, check_counts(pred_count, gt_count, overlap), p, g);
    }
  }
  return report;
}

void merge_into(ViolationReport& into, ViolationReport&& part) {
  into.pairs_checked += part.pairs_checked;
  into.worst_margin = std::max(into.worst_margin, part.worst_margin);
  into.ordering_failures += part.ordering_failures;
  into.violations.insert(into.violations.end(), part.violations.begin(), part.violations.end());
}

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double vpe(double pred_volume, double gt_volume) {
  if (!(gt_volume > 0.0)) {
    throw std::domain_error("vpe needs a positive reference volume");
  }
  if (!(pred_volume >= 0.0)) {
    throw std::domain_error("vpe needs a non-negative predicted volume");
  }
  return pred_volume / gt_volume - 1.0;
}

VpeBounds vpe_bounds_from_dice(double dice) {
  if (!(dice > 0.0 && dice <= 1.0)) {
    throw std::domain_error("Dice must lie in (0, 1] to bound vpe, got " + std::to_string(dice));
  }
  return {2.0 / (2.0 - dice) - 2.0, 2.0 / dice - 2.0};
}

double avpe_bound(double mean_dice) {
  if (!(mean_dice > 0.0 && mean_dice <= 1.0)) {
    throw std::domain_error("mean Dice must lie in (0, 1], got " + std::to_string(mean_dice));
  }
  return 2.0 / mean_dice - 2.0;
}

ViolationReport verify_bounds_exhaustive(const Dims& dims, std::size_t max_voxels,
                                         unsigned threads) {
  constexpr std::size_t kHardCap = 12;
  const std::size_t n = dims.count();
  if (n == 0 || n > std::min(max_voxels, kHardCap)) {
    throw std::invalid_argument("exhaustive bound check supports 1.." +
                                std::to_string(std::min(max_voxels, kHardCap)) +
                                " voxels, grid has " + std::to_string(n));
  }
  const std::uint64_t patterns = std::uint64_t{1} << n;
  threads = std::max(1U, threads);

  std::vector<std::future<ViolationReport>> parts;
  const std::uint64_t chunk = (patterns + threads - 1) / threads;
  for (std::uint64_t begin = 0; begin < patterns; begin += chunk) {
    const std::uint64_t end = std::min(patterns, begin + chunk);
    parts.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred,
                               enumerate_range, begin, end, patterns));
  }
  ViolationReport report;
  report.worst_margin = -std::numeric_limits<double>::infinity();
  for (auto& part : parts) {
    merge_into(report, part.get());
  }
  return report;
}

ViolationReport verify_bounds_sampled(const Dims& dims, std::uint64_t samples,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Spacing spacing{1.0, 1.0, 1.0};

  ViolationReport report;
  report.worst_margin = -std::numeric_limits<double>::infinity();
  while (report.pairs_checked < samples) {
    const double pred_rate = unit(rng);
    const double gt_rate = unit(rng);
    std::vector<std::uint8_t> pred(dims.count());
    std::vector<std::uint8_t> gt(dims.count());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = unit(rng) < pred_rate;
      gt[i] = unit(rng) < gt_rate;
    }
    const ConfusionCounts c = confusion(BinaryMask(dims, spacing, std::move(pred)),
                                        BinaryMask(dims, spacing, std::move(gt)));
    if (c.tp == 0) {
      continue;
    }
    record(report, check_counts(c.predicted(), c.reference(), c.tp), 0, 0);
  }
  return report;
}

double nested_bound_gap(std::size_t n_voxels) {
  const Dims dims{n_voxels, 1, 1};
  const Spacing spacing{1.0, 1.0, 1.0};
  auto prefix = [&](std::size_t len) {
    std::vector<std::uint8_t> labels(n_voxels, 0);
    std::fill_n(labels.begin(), len, std::uint8_t{1});
    return BinaryMask(dims, spacing, std::move(labels));
  };

  double gap = 0.0;
  for (std::size_t inner = 1; inner <= n_voxels; ++inner) {
    const BinaryMask small = prefix(inner);
    for (std::size_t outer = inner; outer <= n_voxels; ++outer) {
      const BinaryMask large = prefix(outer);
      // pred inside gt: overlap = |pred|, vpe sits on the lower bound.
      const ConfusionCounts under = confusion(small, large);
      const double dice_under = region_metrics(under).dice;
      const double vpe_under = vpe(static_cast<double>(under.predicted()),
                                   static_cast<double>(under.reference()));
      gap = std::max(gap, std::abs(vpe_under - vpe_bounds_from_dice(dice_under).lower));
      // gt inside pred: overlap = |gt|, vpe sits on the upper bound.
      const ConfusionCounts over = confusion(large, small);
      const double dice_over = region_metrics(over).dice;
      const double vpe_over = vpe(static_cast<double>(over.predicted()),
                                  static_cast<double>(over.reference()));
      gap = std::max(gap, std::abs(vpe_over - vpe_bounds_from_dice(dice_over).upper));
    }
  }
  return gap;
}

std::vector<CurveRow> bound_curve(std::span<const double> dice_grid) {
  std::vector<CurveRow> rows;
  rows.reserve(dice_grid.size());
  for (double d : dice_grid) {
    const VpeBounds b = vpe_bounds_from_dice(d);
    rows.push_back({d, b.lower, b.upper, std::abs(b.lower), std::abs(b.upper)});
  }
  return rows;
}

std::vector<double> dice_range(double min, double max, double step) {
  if (!(step > 0.0)) {
    throw std::invalid_argument("curve step must be positive");
  }
  if (!(min > 0.0 && max <= 1.0 && min <= max)) {
    throw std::invalid_argument("curve range must satisfy 0 < min <= max <= 1");
  }
  std::vector<double> grid;
  // Index-based stepping avoids accumulating rounding error across many steps.
  const auto count = static_cast<std::size_t>(std::floor((max - min) / step + 1e-6)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    grid.push_back(std::min(max, min + static_cast<double>(i) * step));
  }
  return grid;
}

void write_curve_csv(std::ostream& os, std::span<const CurveRow> rows) {
  os << "dice,vpe_lower,vpe_upper,abs_lower,abs_upper\n";
  for (const auto& r : rows) {
    os << fmt6(r.dice) << ',' << fmt6(r.lower) << ',' << fmt6(r.upper) << ','
       << fmt6(r.abs_lower) << ',' << fmt6(r.abs_upper) << '\n';
  }
}

CohortSummary summarize_cohort(std::span<const double> dice, std::span<const double> vpe_values) {
  if (dice.empty() || dice.size() != vpe_values.size()) {
    throw std::invalid_argument("cohort needs matching, non-empty dice and vpe lists");
  }
  const double n = static_cast<double>(dice.size());
  CohortSummary s;
  double case_upper_sum = 0.0;
  bool all_positive = true;
  for (std::size_t i = 0; i < dice.size(); ++i) {
    s.mean_dice += dice[i];
    s.mean_abs_vpe += std::abs(vpe_values[i]);
    bool violated = false;
    if (dice[i] > 0.0) {
      const VpeBounds b = vpe_bounds_from_dice(dice[i]);
      case_upper_sum += b.upper;
      violated = vpe_values[i] > b.upper + kSlack * (1.0 + b.upper) ||
                 vpe_values[i] < b.lower - kSlack;
    } else {
      all_positive = false;
    }
    s.case_violations.push_back(violated);
  }
  s.mean_dice /= n;
  s.mean_abs_vpe /= n;
  if (s.mean_dice > 0.0) {
    s.avpe_bound = avpe_bound(s.mean_dice);
    s.avpe_within_bound = s.mean_abs_vpe <= *s.avpe_bound + kSlack;
  }
  if (all_positive) {
    s.mean_case_upper = case_upper_sum / n;
  }
  return s;
}

}  // namespace voleval::bounds
