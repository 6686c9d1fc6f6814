#pragma once

#include <span>
#include <vector>

#include "voleval/volgrid.hpp"

namespace voleval {

/// Boundary voxels of a mask: foreground voxels with at least one background or
/// out-of-volume face neighbour (6-connectivity).
struct SurfaceSet {
  std::vector<Index3> voxels;
};

/// Throws std::invalid_argument for an empty mask.
SurfaceSet extract_surface(const BinaryMask& mask);

/// Per-voxel Euclidean distance in millimeters.
struct DistanceField {
  Dims dims;
  Spacing spacing;
  std::vector<double> mm;

  double at(const Index3& v) const { return mm[v.x + dims.nx * (v.y + dims.ny * v.z)]; }
};

/// Exact anisotropic distance from every voxel center to the nearest surface voxel center of
/// `mask`, via three separable lower-envelope-of-parabolas passes (one per axis).
/// Throws std::invalid_argument for an empty mask.
DistanceField surface_distance_transform(const BinaryMask& mask);

/// Same transform from an explicit source set (sources must lie in the grid).
DistanceField distance_transform(const Dims& dims, const Spacing& spacing,
                                 std::span<const Index3> sources);

/// 1D squared-distance lower envelope: out[q] = min_p weight·(q − p)² + f[p].
/// Entries of f equal to +inf are not sources; a line without sources yields +inf.
void lower_envelope_1d(std::span<const double> f, double weight, std::span<double> out);

}  // namespace voleval
