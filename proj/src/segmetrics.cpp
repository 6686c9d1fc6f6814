#include "voleval/segmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "voleval/volbounds.hpp"

namespace voleval {

void require_same_geometry(const BinaryMask& a, const BinaryMask& b) {
  if (a.dims() != b.dims()) {
    throw std::invalid_argument("masks have different dimensions");
  }
  if (!spacing_close(a.spacing(), b.spacing(), 1e-6)) {
    throw std::invalid_argument("masks have different voxel spacing");
  }
}

ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_geometry(pred, gt);
  const auto p = pred.labels();
  const auto g = gt.labels();
  ConfusionCounts c;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] != 0) {
      ++(g[i] != 0 ? c.tp : c.fp);
    } else {
      ++(g[i] != 0 ? c.fn : c.tn);
    }
  }
  return c;
}

RegionMetrics region_metrics(const ConfusionCounts& c) {
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn);
  RegionMetrics r;
  if (c.tp + c.fp + c.fn == 0) {
    r.dice = 1.0;
    r.jaccard = 1.0;
  } else {
    r.dice = 2.0 * tp / (2.0 * tp + fp + fn);
    r.jaccard = tp / (tp + fp + fn);
  }
  if (c.predicted() > 0) {
    r.precision = tp / (tp + fp);
  }
  if (c.reference() > 0) {
    r.recall = tp / (tp + fn);
  }
  return r;
}

double percentile_sorted(std::span<const double> ascending, double q) {
  if (ascending.empty()) {
    throw std::invalid_argument("percentile of an empty sequence");
  }
  const double rank = q * static_cast<double>(ascending.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return ascending[lo] + frac * (ascending[hi] - ascending[lo]);
}

std::vector<double> directed_surface_distances(const BinaryMask& from, const BinaryMask& to) {
  require_same_geometry(from, to);
  const DistanceField field = surface_distance_transform(to);
  const SurfaceSet surface = extract_surface(from);
  std::vector<double> out;
  out.reserve(surface.voxels.size());
  for (const Index3& v : surface.voxels) {
    out.push_back(field.at(v));
  }
  return out;
}

std::optional<BoundaryMetrics> boundary_metrics(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_geometry(pred, gt);
  if (pred.is_empty() || gt.is_empty()) {
    return std::nullopt;
  }
  std::vector<double> pooled = directed_surface_distances(pred, gt);
  const std::vector<double> back = directed_surface_distances(gt, pred);
  pooled.insert(pooled.end(), back.begin(), back.end());
  std::sort(pooled.begin(), pooled.end());

  BoundaryMetrics m;
  m.hd95_mm = percentile_sorted(pooled, 0.95);
  m.assd_mm = std::accumulate(pooled.begin(), pooled.end(), 0.0) /
              static_cast<double>(pooled.size());
  return m;
}

std::optional<double> cohen_kappa(const ConfusionCounts& c) {
  // Integer form: κ = (N·agree − chance) / (N² − chance), chance = a1·b1 + a0·b0.
  __extension__ using wide = unsigned __int128;
  const wide n = c.total();
  const wide agree = c.tp + c.tn;
  const wide a1 = c.tp + c.fp;
  const wide b1 = c.tp + c.fn;
  const wide chance = a1 * b1 + (n - a1) * (n - b1);
  const wide denom = n * n - chance;
  if (n == 0 || denom == 0) {
    return std::nullopt;
  }
  const wide observed = n * agree;
  const double num = observed >= chance ? static_cast<double>(observed - chance)
                                        : -static_cast<double>(chance - observed);
  return num / static_cast<double>(denom);
}

std::optional<double> cohen_kappa(const BinaryMask& a, const BinaryMask& b) {
  return cohen_kappa(confusion(a, b));
}

CaseMetrics evaluate_case(const BinaryMask& pred, const BinaryMask& gt) {
  const ConfusionCounts c = confusion(pred, gt);
  const RegionMetrics region = region_metrics(c);

  CaseMetrics m;
  m.dice = region.dice;
  m.jaccard = region.jaccard;
  m.precision = region.precision;
  m.recall = region.recall;
  if (const auto boundary = boundary_metrics(pred, gt)) {
    m.hd95_mm = boundary->hd95_mm;
    m.assd_mm = boundary->assd_mm;
  }
  m.pred_volume_ml = mask_volume_ml(pred);
  m.gt_volume_ml = mask_volume_ml(gt);
  if (c.reference() > 0) {
    // Both masks share one voxel size, so the count ratio is the volume ratio.
    m.vpe = bounds::vpe(static_cast<double>(c.predicted()), static_cast<double>(c.reference()));
  }
  return m;
}

}  // namespace voleval
