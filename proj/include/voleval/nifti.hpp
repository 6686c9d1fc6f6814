#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "voleval/volgrid.hpp"

namespace voleval {

class NiftiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The subset of the 348-byte NIfTI-1 header this library interprets.
/// qform/sform are parsed by other tools; here geometry comes from pixdim only.
struct NiftiHeader {
  std::array<std::int16_t, 8> dim{};
  std::int16_t datatype = 0;
  std::int16_t bitpix = 0;
  std::array<float, 8> pixdim{};
  float vox_offset = 0.0F;
  float scl_slope = 0.0F;
  float scl_inter = 0.0F;
  bool big_endian = false;
  bool gzipped = false;
};

inline constexpr std::int16_t kNiftiUint8 = 2;
inline constexpr std::int16_t kNiftiInt16 = 4;
inline constexpr std::int16_t kNiftiFloat32 = 16;
inline constexpr std::int16_t kNiftiFloat64 = 64;

/// Reads and validates only the header. Cheap way to size a volume before loading it.
NiftiHeader read_nifti_header(const std::filesystem::path& path);

/// Loads a single-file NIfTI-1 volume (.nii or gzip-compressed .nii.gz).
///
/// Either byte order is accepted. A 4D file is accepted only when its fourth
/// extent is 1. Negative pixdim entries are taken by absolute value. When
/// scl_slope is non-zero and not the identity (1, 0) the values are scaled and
/// the grid is tagged float64.
VolumeGrid load_nifti(const std::filesystem::path& path);

/// Writes a little-endian single-file NIfTI-1 volume with vox_offset 352.
/// The output is gzip-compressed when the path ends in ".gz".
void write_nifti(const VolumeGrid& grid, const std::filesystem::path& path);

}  // namespace voleval
