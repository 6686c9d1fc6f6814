#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "voleval/edt.hpp"
#include "voleval/volgrid.hpp"

namespace voleval {

/// Voxelwise agreement counts between a prediction and a reference.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  std::uint64_t predicted() const { return tp + fp; }
  std::uint64_t reference() const { return tp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Throws std::invalid_argument when dims differ or spacing differs by more than 1e-6 relative.
void require_same_geometry(const BinaryMask& a, const BinaryMask& b);

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt);

/// Overlap metrics. Two empty masks agree perfectly (dice = jaccard = 1); precision and
/// recall are absent when their denominator is zero.
struct RegionMetrics {
  double dice = 0.0;
  double jaccard = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
};

RegionMetrics region_metrics(const ConfusionCounts& c);

struct BoundaryMetrics {
  double hd95_mm = 0.0;
  double assd_mm = 0.0;
};

/// Linear-interpolation percentile of an ascending sequence: rank r = q·(m − 1), zero-based.
double percentile_sorted(std::span<const double> ascending, double q);

/// Distances from each surface voxel of `from` to the nearest surface voxel of `to`.
std::vector<double> directed_surface_distances(const BinaryMask& from, const BinaryMask& to);

/// HD95 and ASSD over the pooled directed surface distances of both masks.
/// Absent when either mask is empty.
std::optional<BoundaryMetrics> boundary_metrics(const BinaryMask& pred, const BinaryMask& gt);

/// Cohen's kappa over the whole volume, background included.
/// Absent when chance agreement is 1 (both raters constant and identical).
std::optional<double> cohen_kappa(const ConfusionCounts& c);
std::optional<double> cohen_kappa(const BinaryMask& a, const BinaryMask& b);

/// Everything reported per case. Optional fields are undefined for degenerate inputs.
struct CaseMetrics {
  double dice = 0.0;
  double jaccard = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> hd95_mm;
  std::optional<double> assd_mm;
  double pred_volume_ml = 0.0;
  double gt_volume_ml = 0.0;
  /// pred/gt − 1; absent for an empty reference.
  std::optional<double> vpe;
};

CaseMetrics evaluate_case(const BinaryMask& pred, const BinaryMask& gt);

}  // namespace voleval
