#include "voleval/phantom.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "voleval/nifti.hpp"

namespace voleval {

namespace {

// splitmix64: fixed integer recurrence, identical on every platform.
class SplitMix {
 public:
  explicit SplitMix(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  double uniform(double lo, double hi) {
    const double unit = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * unit;
  }

 private:
  std::uint64_t state_;
};

struct Ellipsoid {
  double cx, cy, cz;
  double rx, ry, rz;
  double ripple;
  double fx, fy, fz;
  double px, py, pz;
};

BinaryMask rasterize(const Ellipsoid& e, const Dims& dims, const Spacing& spacing) {
  std::vector<std::uint8_t> labels(dims.count(), 0);
  for (std::size_t z = 0; z < dims.nz; ++z) {
    for (std::size_t y = 0; y < dims.ny; ++y) {
      for (std::size_t x = 0; x < dims.nx; ++x) {
        const double u = (static_cast<double>(x) - e.cx) / e.rx;
        const double v = (static_cast<double>(y) - e.cy) / e.ry;
        const double w = (static_cast<double>(z) - e.cz) / e.rz;
        const double wobble = 1.0 + e.ripple * std::sin(e.fx * u + e.px) *
                                        std::sin(e.fy * v + e.py) * std::sin(e.fz * w + e.pz);
        if (u * u + v * v + w * w <= wobble * wobble) {
          labels[x + dims.nx * (y + dims.ny * z)] = 1;
        }
      }
    }
  }
  return BinaryMask(dims, spacing, std::move(labels));
}

}  // namespace

PhantomCase make_phantom_case(std::size_t index, std::uint64_t seed) {
  SplitMix rng(seed * 0x100000001B3ULL + index);
  const Dims dims{40, 36, 24};
  const Spacing spacing{rng.uniform(0.6, 1.0), rng.uniform(0.6, 1.0), rng.uniform(1.5, 3.0)};
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  Ellipsoid gt{};
  gt.cx = rng.uniform(17.0, 23.0);
  gt.cy = rng.uniform(15.0, 21.0);
  gt.cz = rng.uniform(10.0, 14.0);
  gt.rx = rng.uniform(8.0, 14.0);
  gt.ry = rng.uniform(6.0, 11.0);
  gt.rz = rng.uniform(4.0, 7.0);
  gt.ripple = rng.uniform(0.0, 0.15);
  gt.fx = rng.uniform(1.0, 4.0);
  gt.fy = rng.uniform(1.0, 4.0);
  gt.fz = rng.uniform(1.0, 4.0);
  gt.px = rng.uniform(0.0, kTwoPi);
  gt.py = rng.uniform(0.0, kTwoPi);
  gt.pz = rng.uniform(0.0, kTwoPi);

  Ellipsoid pred = gt;
  pred.cx += rng.uniform(-1.5, 1.5);
  pred.cy += rng.uniform(-1.5, 1.5);
  pred.cz += rng.uniform(-1.0, 1.0);
  pred.rx *= rng.uniform(0.85, 1.15);
  pred.ry *= rng.uniform(0.85, 1.15);
  pred.rz *= rng.uniform(0.85, 1.15);
  pred.ripple = rng.uniform(0.0, 0.15);
  pred.px = rng.uniform(0.0, kTwoPi);
  pred.py = rng.uniform(0.0, kTwoPi);
  pred.pz = rng.uniform(0.0, kTwoPi);

  char id[32];
  std::snprintf(id, sizeof id, "case_%03zu", index);
  return {id, rasterize(gt, dims, spacing), rasterize(pred, dims, spacing)};
}

void write_phantom_dataset(const std::filesystem::path& root, std::size_t cases,
                           std::uint64_t seed) {
  std::filesystem::create_directories(root / "pred");
  std::filesystem::create_directories(root / "gt");
  for (std::size_t i = 0; i < cases; ++i) {
    const PhantomCase c = make_phantom_case(i, seed);
    write_nifti(c.gt.to_grid(), root / "gt" / (c.case_id + ".nii"));
    write_nifti(c.pred.to_grid(), root / "pred" / (c.case_id + ".nii"));
  }
}

}  // namespace voleval
