#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "voleval/volgrid.hpp"

namespace voleval {

/// A reference/prediction mask pair made of two deformed ellipsoids.
struct PhantomCase {
  std::string case_id;
  BinaryMask gt;
  BinaryMask pred;
};

/// Deterministic synthetic case `index` of a dataset seeded by `seed`. The prediction is the
/// reference ellipsoid with shifted center, rescaled radii and a different surface ripple, so
/// overlap is high but imperfect. Uses its own integer RNG so the output does not depend on
/// the standard library's distribution implementations.
PhantomCase make_phantom_case(std::size_t index, std::uint64_t seed);

/// Writes `cases` phantom pairs as `<root>/pred/case_NNN.nii` and `<root>/gt/case_NNN.nii`.
void write_phantom_dataset(const std::filesystem::path& root, std::size_t cases,
                           std::uint64_t seed);

}  // namespace voleval
