#include "voleval/volgrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace voleval {

std::string_view dtype_name(DType t) {
  switch (t) {
    case DType::uint8: return "uint8";
    case DType::int16: return "int16";
    case DType::float32: return "float32";
    case DType::float64: return "float64";
  }
  return "unknown";
}

bool spacing_close(const Spacing& a, const Spacing& b, double rel_tol) {
  auto close = [rel_tol](double u, double v) {
    return std::abs(u - v) <= rel_tol * std::max(std::abs(u), std::abs(v));
  };
  return close(a.sx, b.sx) && close(a.sy, b.sy) && close(a.sz, b.sz);
}

namespace {

void check_geometry(const Dims& dims, const Spacing& spacing, std::size_t n_values) {
  if (dims.nx == 0 || dims.ny == 0 || dims.nz == 0) {
    throw std::invalid_argument("volume dimensions must be positive");
  }
  for (double s : {spacing.sx, spacing.sy, spacing.sz}) {
    if (!std::isfinite(s) || s <= 0.0) {
      throw std::invalid_argument("voxel spacing must be finite and positive");
    }
  }
  if (n_values != dims.count()) {
    throw std::invalid_argument("value count " + std::to_string(n_values) +
                                " does not match dimensions (" +
                                std::to_string(dims.count()) + " voxels)");
  }
}

bool representable(double v, DType t) {
  switch (t) {
    case DType::uint8:
      return v >= 0.0 && v <= 255.0 && std::trunc(v) == v;
    case DType::int16:
      return v >= -32768.0 && v <= 32767.0 && std::trunc(v) == v;
    case DType::float32:
      return std::isnan(v) || static_cast<double>(static_cast<float>(v)) == v;
    case DType::float64:
      return true;
  }
  return false;
}

}  // namespace

VolumeGrid::VolumeGrid(Dims dims, Spacing spacing, std::vector<double> values, DType dtype)
    : dims_(dims), spacing_(spacing), values_(std::move(values)), dtype_(dtype) {
  check_geometry(dims_, spacing_, values_.size());
  for (double v : values_) {
    if (!representable(v, dtype_)) {
      throw std::invalid_argument("value " + std::to_string(v) + " is not representable as " +
                                  std::string(dtype_name(dtype_)));
    }
  }
}

BinaryMask::BinaryMask(Dims dims, Spacing spacing, std::vector<std::uint8_t> labels)
    : dims_(dims), spacing_(spacing), labels_(std::move(labels)) {
  check_geometry(dims_, spacing_, labels_.size());
  if (std::any_of(labels_.begin(), labels_.end(), [](std::uint8_t v) { return v > 1; })) {
    throw std::invalid_argument("binary mask labels must be 0 or 1");
  }
}

BinaryMask BinaryMask::empty(Dims dims, Spacing spacing) {
  return BinaryMask(dims, spacing, std::vector<std::uint8_t>(dims.count(), 0));
}

BinaryMask BinaryMask::from_grid(const VolumeGrid& grid) {
  if (!is_binary(grid)) {
    throw std::invalid_argument("grid holds values other than 0 and 1");
  }
  return binarize(grid, 0.5);
}

std::size_t BinaryMask::foreground_count() const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), std::uint8_t{1}));
}

VolumeGrid BinaryMask::to_grid() const {
  return VolumeGrid(dims_, spacing_, std::vector<double>(labels_.begin(), labels_.end()),
                    DType::uint8);
}

BinaryMask BinaryMask::with_spacing(Spacing spacing) const {
  return BinaryMask(dims_, spacing, labels_);
}

BinaryMask binarize(const VolumeGrid& grid, double threshold) {
  if (!std::isfinite(threshold)) {
    throw std::invalid_argument("binarization threshold must be finite");
  }
  const auto values = grid.values();
  std::vector<std::uint8_t> labels(values.size());
  std::transform(values.begin(), values.end(), labels.begin(),
                 [threshold](double v) { return static_cast<std::uint8_t>(v > threshold); });
  return BinaryMask(grid.dims(), grid.spacing(), std::move(labels));
}

bool is_binary(const VolumeGrid& grid) {
  const auto values = grid.values();
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

double mask_volume_ml(const BinaryMask& mask) {
  return static_cast<double>(mask.foreground_count()) * mask.spacing().voxel_volume_mm3() / 1000.0;
}

}  // namespace voleval
