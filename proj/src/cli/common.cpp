#include "common.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "voleval/case_table.hpp"
#include "voleval/nifti.hpp"
#include "voleval/segmetrics.hpp"

namespace voleval::cli {

namespace {

// stem -> file, for every .nii/.nii.gz in `dir`; stems present twice are reported and dropped.
std::map<std::string, fs::path> list_masks(const fs::path& dir, const char* side,
                                           std::vector<std::string>& errors) {
  std::error_code ec;
  fs::directory_iterator it(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot list " + dir.string() + ": " + ec.message());
  }
  std::map<std::string, fs::path> found;
  std::set<std::string> clashes;
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    const std::string stem = mask_stem(entry.path());
    if (stem.empty()) continue;
    if (!found.emplace(stem, entry.path()).second) {
      clashes.insert(stem);
    }
  }
  for (const auto& stem : clashes) {
    errors.push_back(stem + ": more than one " + side + " file with this stem");
    found.erase(stem);
  }
  return found;
}

BinaryMask load_mask(const fs::path& path, double threshold,
                     std::optional<std::uint64_t> memory_cap, std::vector<std::string>& warnings,
                     const std::string& case_id) {
  if (memory_cap) {
    const NiftiHeader h = read_nifti_header(path);
    const std::uint64_t voxels = static_cast<std::uint64_t>(h.dim[1]) *
                                 static_cast<std::uint64_t>(h.dim[2]) *
                                 static_cast<std::uint64_t>(h.dim[3]);
    const std::uint64_t need = case_memory_estimate(voxels);
    if (need > *memory_cap) {
      throw std::runtime_error(path.string() + ": needs about " +
                               std::to_string(need >> 20) + " MiB, worker cap is " +
                               std::to_string(*memory_cap >> 20) + " MiB");
    }
  }
  const VolumeGrid grid = load_nifti(path);
  if (is_binary(grid)) {
    return BinaryMask::from_grid(grid);
  }
  warnings.push_back(case_id + ": " + path.filename().string() +
                     " is not binary; thresholding at " + format_g6(threshold));
  return binarize(grid, threshold);
}

}  // namespace

std::string mask_stem(const fs::path& file) {
  const std::string name = file.filename().string();
  for (const std::string_view ext : {".nii.gz", ".nii"}) {
    if (name.size() > ext.size() && name.ends_with(ext)) {
      return name.substr(0, name.size() - ext.size());
    }
  }
  return {};
}

DatasetManifest pair_by_stem(const fs::path& pred_dir, const fs::path& gt_dir,
                             const std::string& group) {
  DatasetManifest m;
  const auto preds = list_masks(pred_dir, "prediction", m.errors);
  const auto gts = list_masks(gt_dir, "reference", m.errors);
  for (const auto& [stem, path] : preds) {
    const auto it = gts.find(stem);
    if (it == gts.end()) {
      m.errors.push_back(stem + ": no reference file in " + gt_dir.string());
      continue;
    }
    m.cases.push_back({stem, path, it->second, group, std::nullopt});
  }
  for (const auto& [stem, path] : gts) {
    if (!preds.contains(stem)) {
      m.errors.push_back(stem + ": no prediction file in " + pred_dir.string());
    }
  }
  std::sort(m.errors.begin(), m.errors.end());
  return m;
}

DatasetManifest read_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) {
    throw std::runtime_error("cannot open manifest " + manifest.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw CsvError("empty manifest");
  }
  const auto header = split_csv_line(line);
  const std::vector<std::string> base{"case_id", "pred_path", "gt_path", "group"};
  const bool keyed = header.size() == 5 && header[4] == "pair_key";
  if (!std::equal(base.begin(), base.end(), header.begin(), header.begin() + std::min<std::size_t>(header.size(), 4)) ||
      (header.size() != 4 && !keyed)) {
    throw CsvError("manifest header must be case_id,pred_path,gt_path,group[,pair_key]");
  }
  const fs::path root = manifest.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : root / p; };

  DatasetManifest m;
  std::set<std::string> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size() || f[0].empty()) {
      throw CsvError("manifest line " + std::to_string(line_no) + ": expected " +
                     std::to_string(header.size()) + " columns and a case id");
    }
    if (!ids.insert(f[0]).second) {
      throw CsvError("manifest line " + std::to_string(line_no) + ": duplicate case id " + f[0]);
    }
    CaseSource c{f[0], resolve(f[1]), resolve(f[2]), f[3], std::nullopt};
    if (keyed && !f[4].empty()) c.pair_key = f[4];
    std::string missing;
    for (const auto& p : {c.pred, c.gt}) {
      if (!fs::exists(p)) missing += (missing.empty() ? "" : ", ") + p.string();
    }
    if (!missing.empty()) {
      m.errors.push_back(c.case_id + ": missing " + missing);
      continue;
    }
    m.cases.push_back(std::move(c));
  }
  std::sort(m.cases.begin(), m.cases.end(),
            [](const CaseSource& a, const CaseSource& b) { return a.case_id < b.case_id; });
  return m;
}

std::uint64_t case_memory_estimate(std::uint64_t voxels) {
  // two float64 grids, two masks, one distance field and its sweep buffer
  constexpr std::uint64_t kBytesPerVoxel = 8 + 8 + 1 + 1 + 8 + 8;
  return voxels * kBytesPerVoxel;
}

bool write_output(const std::string& path, const std::string& text, std::ostream& out,
                  std::ostream& err) {
  if (path == "-") {
    out << text;
    out.flush();
    return true;
  }
  std::ofstream f(path, std::ios::binary);
  f << text;
  f.close();
  if (!f) {
    err << "error: cannot write " << path << '\n';
    return false;
  }
  return true;
}

std::optional<std::uint64_t> memory_cap_bytes() {
  const char* raw = std::getenv(kMemoryCapEnv);
  if (raw == nullptr || *raw == '\0') {
    return std::nullopt;
  }
  const std::string_view text(raw);
  std::uint64_t mb = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), mb);
  if (ec != std::errc() || ptr != text.data() + text.size() || mb == 0 || mb > (1ULL << 40)) {
    throw std::invalid_argument(std::string(kMemoryCapEnv) + " must be a positive integer (MiB)");
  }
  return mb << 20;
}

MaskPair load_pair(const CaseSource& source, double threshold,
                   std::optional<std::uint64_t> memory_cap) {
  std::vector<std::string> warnings;
  BinaryMask pred = load_mask(source.pred, threshold, memory_cap, warnings, source.case_id);
  BinaryMask gt = load_mask(source.gt, threshold, memory_cap, warnings, source.case_id);
  try {
    require_same_geometry(pred, gt);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("shape mismatch: ") + e.what());
  }
  return {std::move(pred), std::move(gt), std::move(warnings)};
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(jobs, 1U), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace voleval::cli
