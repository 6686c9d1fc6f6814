#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "voleval/attention_checks.hpp"

namespace voleval::cli {

namespace fs = std::filesystem;

enum class Exit : int {
  ok = 0,
  internal = 1,
  usage = 2,
  io = 3,
  check_failed = 4,
  partial = 5,
  no_pairs = 6,
  bad_input = 7,
};

inline int code(Exit e) { return static_cast<int>(e); }

/// Environment variable holding the per-worker memory cap in MiB.
inline constexpr const char* kMemoryCapEnv = "VOLEVAL_MAX_WORKER_MB";

struct CaseSource {
  std::string case_id;
  fs::path pred;
  fs::path gt;
  std::string group;
  std::optional<std::string> pair_key;
};

struct DatasetManifest {
  std::vector<CaseSource> cases;  ///< sorted by case_id
  /// Files without a partner, duplicate stems and the like; each counts as a failed case.
  std::vector<std::string> errors;
};

/// "abc.nii.gz" and "abc.nii" both give "abc"; anything else gives an empty string.
std::string mask_stem(const fs::path& file);

/// Pairs `<pred_dir>/X.nii[.gz]` with `<gt_dir>/X.nii[.gz]`. Throws std::runtime_error when a
/// directory cannot be listed.
DatasetManifest pair_by_stem(const fs::path& pred_dir, const fs::path& gt_dir,
                             const std::string& group);

/// CSV with header `case_id,pred_path,gt_path,group[,pair_key]`. Relative paths resolve
/// against the manifest's directory. Throws CsvError on malformed rows or duplicate ids.
DatasetManifest read_manifest(const fs::path& manifest);

/// Bytes a worker is expected to hold while evaluating a case with `voxels` voxels.
std::uint64_t case_memory_estimate(std::uint64_t voxels);

struct EvalOptions {
  fs::path pred_dir;
  fs::path gt_dir;
  std::optional<fs::path> manifest;
  std::string group = "all";
  std::string out;
  /// Defaults to `<out>` with its extension replaced by ".summary.json"; nothing when out is "-".
  std::optional<std::string> summary;
  double threshold = 0.5;
  unsigned jobs = 1;
};

struct AgreeOptions {
  fs::path rater_a;
  fs::path rater_b;
  std::string out;
  std::optional<std::string> summary;
  double threshold = 0.5;
  unsigned jobs = 1;
};

struct BoundsOptions {
  std::optional<std::array<double, 3>> curve;  ///< min, max, step
  std::optional<fs::path> audit;
  std::string out;
};

struct AttnCheckOptions {
  attn::AttentionCheckOptions checks;
  std::optional<std::string> out;
};

struct AttnBenchOptions {
  std::vector<std::uint64_t> linear_n{1024, 4096, 16384, 65536};
  std::vector<std::uint64_t> quadratic_n{256, 1024, 4096};
  std::uint64_t d = 16;
  int repeats = 5;
  std::uint64_t seed = 1;
  std::string out;
};

struct VolumeOptions {
  fs::path eval_csv;
  std::string out;
};

// Each command writes results to `out` only when its output path is "-"; diagnostics go to `err`.
int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err);
int cmd_agree(const AgreeOptions& o, std::ostream& out, std::ostream& err);
int cmd_bounds(const BoundsOptions& o, std::ostream& out, std::ostream& err);
int cmd_attn_check(const AttnCheckOptions& o, std::ostream& out, std::ostream& err);
int cmd_attn_bench(const AttnBenchOptions& o, std::ostream& out, std::ostream& err);
int cmd_volume(const VolumeOptions& o, std::ostream& out, std::ostream& err);

/// Parses `args` (without the program name) and dispatches to a command.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace voleval::cli
