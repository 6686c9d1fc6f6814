#include "voleval/nifti.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <vector>

namespace voleval {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kWriteOffset = 352;

bool has_gzip_magic(std::span<const unsigned char> bytes) {
  return bytes.size() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B;
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw NiftiError("cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<unsigned char> gunzip(std::span<const unsigned char> packed,
                                  const std::filesystem::path& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
    throw NiftiError("zlib initialisation failed");
  }
  zs.next_in = const_cast<Bytef*>(packed.data());
  zs.avail_in = static_cast<uInt>(packed.size());

  std::vector<unsigned char> out;
  std::array<unsigned char, 1 << 16> chunk{};
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw NiftiError("corrupt gzip stream in " + path.string());
    }
    out.insert(out.end(), chunk.begin(), chunk.end() - zs.avail_out);
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      break;  // input exhausted before end of stream: truncated
    }
  }
  inflateEnd(&zs);
  return out;
}

template <typename T>
T load_scalar(const unsigned char* p, bool swap) {
  std::array<unsigned char, sizeof(T)> buf{};
  std::memcpy(buf.data(), p, sizeof(T));
  if (swap) {
    std::reverse(buf.begin(), buf.end());
  }
  T v;
  std::memcpy(&v, buf.data(), sizeof(T));
  return v;
}

template <typename T>
void store_le(unsigned char* p, T v) {
  std::memcpy(p, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(p, p + sizeof(T));
  }
}

NiftiHeader parse_header(std::span<const unsigned char> bytes, const std::filesystem::path& path) {
  if (bytes.size() < kHeaderSize) {
    throw NiftiError("truncated NIfTI header in " + path.string());
  }
  const unsigned char* h = bytes.data();
  constexpr bool native_little = std::endian::native == std::endian::little;

  // Byte order is decided by whether dim[0] reads as a sane rank.
  auto dim0_le = load_scalar<std::int16_t>(h + 40, !native_little);
  bool big_endian = false;
  if (dim0_le < 1 || dim0_le > 7) {
    auto dim0_be = load_scalar<std::int16_t>(h + 40, native_little);
    if (dim0_be < 1 || dim0_be > 7) {
      throw NiftiError("malformed NIfTI header (dim[0] out of range) in " + path.string());
    }
    big_endian = true;
  }
  const bool swap = big_endian == native_little;

  if (load_scalar<std::int32_t>(h, swap) != static_cast<std::int32_t>(kHeaderSize)) {
    throw NiftiError("malformed NIfTI header (sizeof_hdr != 348) in " + path.string());
  }
  if (std::memcmp(h + 344, "n+1\0", 4) != 0) {
    throw NiftiError("not a single-file NIfTI-1 volume (magic) in " + path.string());
  }

  NiftiHeader hdr;
  hdr.big_endian = big_endian;
  for (std::size_t i = 0; i < 8; ++i) {
    hdr.dim[i] = load_scalar<std::int16_t>(h + 40 + 2 * i, swap);
    hdr.pixdim[i] = load_scalar<float>(h + 76 + 4 * i, swap);
  }
  hdr.datatype = load_scalar<std::int16_t>(h + 70, swap);
  hdr.bitpix = load_scalar<std::int16_t>(h + 72, swap);
  hdr.vox_offset = load_scalar<float>(h + 108, swap);
  hdr.scl_slope = load_scalar<float>(h + 112, swap);
  hdr.scl_inter = load_scalar<float>(h + 116, swap);

  if (hdr.dim[0] != 3 && hdr.dim[0] != 4) {
    throw NiftiError("only 3D volumes are supported (dim[0] = " + std::to_string(hdr.dim[0]) +
                     ") in " + path.string());
  }
  if (hdr.dim[0] == 4 && hdr.dim[4] > 1) {
    throw NiftiError("4D volume with " + std::to_string(hdr.dim[4]) + " frames in " +
                     path.string());
  }
  for (std::size_t i = 1; i <= 3; ++i) {
    if (hdr.dim[i] < 1) {
      throw NiftiError("malformed NIfTI header (non-positive extent) in " + path.string());
    }
    const float s = std::abs(hdr.pixdim[i]);
    if (!std::isfinite(s) || s <= 0.0F) {
      throw NiftiError("malformed NIfTI header (pixdim) in " + path.string());
    }
  }
  switch (hdr.datatype) {
    case kNiftiUint8:
    case kNiftiInt16:
    case kNiftiFloat32:
    case kNiftiFloat64:
      break;
    default:
      throw NiftiError("unsupported NIfTI datatype " + std::to_string(hdr.datatype) + " in " +
                       path.string());
  }
  if (!std::isfinite(hdr.vox_offset) || hdr.vox_offset < static_cast<float>(kHeaderSize)) {
    throw NiftiError("malformed NIfTI header (vox_offset) in " + path.string());
  }
  return hdr;
}

std::size_t bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kNiftiUint8: return 1;
    case kNiftiInt16: return 2;
    case kNiftiFloat32: return 4;
    case kNiftiFloat64: return 8;
    default: return 0;
  }
}

DType to_dtype(std::int16_t datatype) {
  switch (datatype) {
    case kNiftiUint8: return DType::uint8;
    case kNiftiInt16: return DType::int16;
    case kNiftiFloat32: return DType::float32;
    default: return DType::float64;
  }
}

std::int16_t to_datatype(DType t) {
  switch (t) {
    case DType::uint8: return kNiftiUint8;
    case DType::int16: return kNiftiInt16;
    case DType::float32: return kNiftiFloat32;
    case DType::float64: return kNiftiFloat64;
  }
  return 0;
}

std::vector<double> decode_voxels(const unsigned char* p, std::size_t count, std::int16_t datatype,
                                  bool swap) {
  std::vector<double> out(count);
  const std::size_t width = bytes_per_voxel(datatype);
  for (std::size_t i = 0; i < count; ++i, p += width) {
    switch (datatype) {
      case kNiftiUint8: out[i] = *p; break;
      case kNiftiInt16: out[i] = load_scalar<std::int16_t>(p, swap); break;
      case kNiftiFloat32: out[i] = load_scalar<float>(p, swap); break;
      case kNiftiFloat64: out[i] = load_scalar<double>(p, swap); break;
      default: break;
    }
  }
  return out;
}

}  // namespace

NiftiHeader read_nifti_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw NiftiError("cannot open " + path.string());
  }
  std::array<unsigned char, 2> magic{};
  in.read(reinterpret_cast<char*>(magic.data()), 2);
  in.close();

  std::vector<unsigned char> head;
  const bool gz = has_gzip_magic(magic);
  if (gz) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) {
      throw NiftiError("cannot open " + path.string());
    }
    head.resize(kHeaderSize);
    const int got = gzread(f, head.data(), static_cast<unsigned>(kHeaderSize));
    gzclose(f);
    head.resize(got > 0 ? static_cast<std::size_t>(got) : 0);
  } else {
    std::ifstream raw(path, std::ios::binary);
    head.resize(kHeaderSize);
    raw.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(kHeaderSize));
    head.resize(static_cast<std::size_t>(raw.gcount()));
  }
  NiftiHeader hdr = parse_header(head, path);
  hdr.gzipped = gz;
  return hdr;
}

VolumeGrid load_nifti(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  const bool gz = has_gzip_magic(bytes);
  if (gz) {
    bytes = gunzip(bytes, path);
  }
  NiftiHeader hdr = parse_header(bytes, path);
  hdr.gzipped = gz;

  const Dims dims{static_cast<std::size_t>(hdr.dim[1]), static_cast<std::size_t>(hdr.dim[2]),
                  static_cast<std::size_t>(hdr.dim[3])};
  const Spacing spacing{std::abs(static_cast<double>(hdr.pixdim[1])),
                        std::abs(static_cast<double>(hdr.pixdim[2])),
                        std::abs(static_cast<double>(hdr.pixdim[3]))};

  const auto offset = static_cast<std::size_t>(hdr.vox_offset);
  const std::size_t payload = dims.count() * bytes_per_voxel(hdr.datatype);
  if (bytes.size() < offset + payload) {
    throw NiftiError("truncated voxel payload in " + path.string() + " (need " +
                     std::to_string(offset + payload) + " bytes, have " +
                     std::to_string(bytes.size()) + ")");
  }

  const bool swap = hdr.big_endian == (std::endian::native == std::endian::little);
  auto values = decode_voxels(bytes.data() + offset, dims.count(), hdr.datatype, swap);

  DType dtype = to_dtype(hdr.datatype);
  const double slope = hdr.scl_slope;
  const double inter = hdr.scl_inter;
  if (std::isfinite(slope) && slope != 0.0 && (slope != 1.0 || inter != 0.0)) {
    for (double& v : values) {
      v = slope * v + inter;
    }
    dtype = DType::float64;
  }
  return VolumeGrid(dims, spacing, std::move(values), dtype);
}

void write_nifti(const VolumeGrid& grid, const std::filesystem::path& path) {
  const Dims& dims = grid.dims();
  const Spacing& sp = grid.spacing();
  const std::int16_t datatype = to_datatype(grid.dtype());
  const std::size_t width = bytes_per_voxel(datatype);
  constexpr std::size_t kMaxExtent = 32767;
  if (dims.nx > kMaxExtent || dims.ny > kMaxExtent || dims.nz > kMaxExtent) {
    throw NiftiError("volume extent exceeds the NIfTI-1 limit of 32767");
  }

  std::vector<unsigned char> out(kWriteOffset + dims.count() * width, 0);
  unsigned char* h = out.data();
  store_le<std::int32_t>(h, static_cast<std::int32_t>(kHeaderSize));
  const std::array<std::int16_t, 8> dim{3,
                                        static_cast<std::int16_t>(dims.nx),
                                        static_cast<std::int16_t>(dims.ny),
                                        static_cast<std::int16_t>(dims.nz),
                                        1, 1, 1, 1};
  const std::array<float, 8> pixdim{1.0F,
                                    static_cast<float>(sp.sx),
                                    static_cast<float>(sp.sy),
                                    static_cast<float>(sp.sz),
                                    1.0F, 1.0F, 1.0F, 1.0F};
  for (std::size_t i = 0; i < 8; ++i) {
    store_le<std::int16_t>(h + 40 + 2 * i, dim[i]);
    store_le<float>(h + 76 + 4 * i, pixdim[i]);
  }
  store_le<std::int16_t>(h + 70, datatype);
  store_le<std::int16_t>(h + 72, static_cast<std::int16_t>(8 * width));
  store_le<float>(h + 108, static_cast<float>(kWriteOffset));
  store_le<float>(h + 112, 1.0F);
  store_le<float>(h + 116, 0.0F);
  h[123] = 2;  // xyzt_units: millimeters
  // Scanner-aligned sform so viewers place the volume sensibly; ignored on read.
  store_le<std::int16_t>(h + 254, 1);
  store_le<float>(h + 280, static_cast<float>(sp.sx));
  store_le<float>(h + 296 + 4, static_cast<float>(sp.sy));
  store_le<float>(h + 312 + 8, static_cast<float>(sp.sz));
  std::memcpy(h + 344, "n+1\0", 4);

  unsigned char* p = h + kWriteOffset;
  for (double v : grid.values()) {
    switch (grid.dtype()) {
      case DType::uint8: *p = static_cast<unsigned char>(v); break;
      case DType::int16: store_le<std::int16_t>(p, static_cast<std::int16_t>(v)); break;
      case DType::float32: store_le<float>(p, static_cast<float>(v)); break;
      case DType::float64: store_le<double>(p, v); break;
    }
    p += width;
  }

  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.c_str(), "wb");
    if (f == nullptr) {
      throw NiftiError("cannot write " + path.string());
    }
    const int wrote = gzwrite(f, out.data(), static_cast<unsigned>(out.size()));
    if (gzclose(f) != Z_OK || wrote != static_cast<int>(out.size())) {
      throw NiftiError("failed writing " + path.string());
    }
    return;
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw NiftiError("cannot write " + path.string());
  }
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) {
    throw NiftiError("failed writing " + path.string());
  }
}

}  // namespace voleval
