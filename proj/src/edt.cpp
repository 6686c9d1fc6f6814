#include "voleval/edt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace voleval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool on_surface(const BinaryMask& m, std::size_t x, std::size_t y, std::size_t z) {
  const Dims& d = m.dims();
  if (x == 0 || y == 0 || z == 0 || x + 1 == d.nx || y + 1 == d.ny || z + 1 == d.nz) {
    return true;
  }
  return !m.at(x - 1, y, z) || !m.at(x + 1, y, z) || !m.at(x, y - 1, z) ||
         !m.at(x, y + 1, z) || !m.at(x, y, z - 1) || !m.at(x, y, z + 1);
}

// Runs the 1D envelope along every line parallel to one axis of a dense x-fastest field.
void sweep_axis(std::vector<double>& field, const Dims& dims, int axis, double weight) {
  const std::size_t extent = axis == 0 ? dims.nx : axis == 1 ? dims.ny : dims.nz;
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? dims.nx : dims.nx * dims.ny;
  const std::size_t lines = dims.count() / extent;

  std::vector<double> line(extent);
  std::vector<double> result(extent);
  for (std::size_t l = 0; l < lines; ++l) {
    std::size_t base = 0;
    switch (axis) {
      case 0: base = l * dims.nx; break;
      case 1: base = (l % dims.nx) + (l / dims.nx) * dims.nx * dims.ny; break;
      default: base = l; break;
    }
    for (std::size_t i = 0; i < extent; ++i) {
      line[i] = field[base + i * stride];
    }
    lower_envelope_1d(line, weight, result);
    for (std::size_t i = 0; i < extent; ++i) {
      field[base + i * stride] = result[i];
    }
  }
}

}  // namespace

SurfaceSet extract_surface(const BinaryMask& mask) {
  const Dims& d = mask.dims();
  SurfaceSet s;
  for (std::size_t z = 0; z < d.nz; ++z) {
    for (std::size_t y = 0; y < d.ny; ++y) {
      for (std::size_t x = 0; x < d.nx; ++x) {
        if (mask.at(x, y, z) && on_surface(mask, x, y, z)) {
          s.voxels.push_back({x, y, z});
        }
      }
    }
  }
  if (s.voxels.empty()) {
    throw std::invalid_argument("surface of an empty mask is undefined");
  }
  return s;
}

void lower_envelope_1d(std::span<const double> f, double weight, std::span<double> out) {
  const std::size_t n = f.size();
  // Parabola apexes and the boundaries between consecutive envelope segments.
  std::vector<std::size_t> apex(n);
  std::vector<double> bound(n + 1);
  std::ptrdiff_t k = -1;

  auto height = [&](std::size_t p) {
    const double dp = static_cast<double>(p);
    return f[p] + weight * dp * dp;
  };

  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) {
      continue;
    }
    if (k < 0) {
      k = 0;
      apex[0] = q;
      bound[0] = -kInf;
      bound[1] = kInf;
      continue;
    }
    double s = 0.0;
    for (;;) {
      const std::size_t p = apex[static_cast<std::size_t>(k)];
      s = (height(q) - height(p)) / (2.0 * weight * static_cast<double>(q - p));
      if (s > bound[static_cast<std::size_t>(k)]) {
        break;
      }
      --k;  // bound[0] is -inf, so k stays >= 0
    }
    ++k;
    apex[static_cast<std::size_t>(k)] = q;
    bound[static_cast<std::size_t>(k)] = s;
    bound[static_cast<std::size_t>(k) + 1] = kInf;
  }

  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  std::size_t seg = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double dq = static_cast<double>(q);
    while (bound[seg + 1] < dq) {
      ++seg;
    }
    const double off = dq - static_cast<double>(apex[seg]);
    out[q] = weight * off * off + f[apex[seg]];
  }
}

DistanceField distance_transform(const Dims& dims, const Spacing& spacing,
                                 std::span<const Index3> sources) {
  if (sources.empty()) {
    throw std::invalid_argument("distance transform needs at least one source voxel");
  }
  std::vector<double> field(dims.count(), kInf);
  for (const Index3& v : sources) {
    if (v.x >= dims.nx || v.y >= dims.ny || v.z >= dims.nz) {
      throw std::out_of_range("distance transform source outside the grid");
    }
    field[v.x + dims.nx * (v.y + dims.ny * v.z)] = 0.0;
  }
  sweep_axis(field, dims, 0, spacing.sx * spacing.sx);
  sweep_axis(field, dims, 1, spacing.sy * spacing.sy);
  sweep_axis(field, dims, 2, spacing.sz * spacing.sz);
  for (double& v : field) {
    v = std::sqrt(v);
  }
  return {dims, spacing, std::move(field)};
}

DistanceField surface_distance_transform(const BinaryMask& mask) {
  const SurfaceSet surface = extract_surface(mask);
  return distance_transform(mask.dims(), mask.spacing(), surface.voxels);
}

}  // namespace voleval
