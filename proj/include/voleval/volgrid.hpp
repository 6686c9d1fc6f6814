#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace voleval {

/// Storage type a grid was read from (and will be written as).
enum class DType { uint8, int16, float32, float64 };

std::string_view dtype_name(DType t);

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t count() const { return nx * ny * nz; }
  bool operator==(const Dims&) const = default;
};

/// Voxel size in millimeters.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  double voxel_volume_mm3() const { return sx * sy * sz; }
  bool operator==(const Spacing&) const = default;
};

/// True when every component agrees within `rel_tol` relative difference.
bool spacing_close(const Spacing& a, const Spacing& b, double rel_tol = 1e-6);

struct Index3 {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t z = 0;

  bool operator==(const Index3&) const = default;
  auto operator<=>(const Index3&) const = default;
};

/// Dense 3D scalar field, x-fastest. Immutable after construction.
///
/// Values are held as double regardless of the storage type; the constructor
/// rejects values that the declared dtype cannot represent exactly, so a grid
/// always round-trips through its on-disk encoding without loss.
class VolumeGrid {
 public:
  VolumeGrid(Dims dims, Spacing spacing, std::vector<double> values,
             DType dtype = DType::float64);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  DType dtype() const { return dtype_; }
  std::span<const double> values() const { return values_; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_.nx * (y + dims_.ny * z);
  }
  double at(std::size_t x, std::size_t y, std::size_t z) const {
    return values_[index(x, y, z)];
  }

  bool operator==(const VolumeGrid&) const = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<double> values_;
  DType dtype_;
};

/// {0,1}-valued volume. Holds the prediction / ground-truth voxel labels.
class BinaryMask {
 public:
  BinaryMask(Dims dims, Spacing spacing, std::vector<std::uint8_t> labels);

  /// All-background mask.
  static BinaryMask empty(Dims dims, Spacing spacing);

  /// Reinterprets a grid whose values are all exactly 0 or 1; throws otherwise.
  static BinaryMask from_grid(const VolumeGrid& grid);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  std::span<const std::uint8_t> labels() const { return labels_; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims_.nx * (y + dims_.ny * z);
  }
  Index3 coords(std::size_t i) const {
    return {i % dims_.nx, (i / dims_.nx) % dims_.ny, i / (dims_.nx * dims_.ny)};
  }
  bool at(std::size_t x, std::size_t y, std::size_t z) const {
    return labels_[index(x, y, z)] != 0;
  }

  std::size_t foreground_count() const;
  bool is_empty() const { return foreground_count() == 0; }

  /// uint8 grid with the same geometry, ready for write_nifti.
  VolumeGrid to_grid() const;

  /// Same labels on a different voxel size.
  BinaryMask with_spacing(Spacing spacing) const;

  bool operator==(const BinaryMask&) const = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<std::uint8_t> labels_;
};

/// Voxel becomes foreground iff its value is strictly greater than `threshold`.
BinaryMask binarize(const VolumeGrid& grid, double threshold);

/// True when every value of the grid is exactly 0 or 1.
bool is_binary(const VolumeGrid& grid);

/// Foreground count times voxel volume, in milliliters.
double mask_volume_ml(const BinaryMask& mask);

}  // namespace voleval
