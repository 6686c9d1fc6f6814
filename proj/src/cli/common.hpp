#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "voleval/cli.hpp"
#include "voleval/volgrid.hpp"

namespace voleval::cli {

/// Writes `text` to the file at `path`, or to `out` when path is "-". Returns false (after
/// reporting to `err`) when the file cannot be written.
bool write_output(const std::string& path, const std::string& text, std::ostream& out,
                  std::ostream& err);

/// Cap from kMemoryCapEnv in bytes; empty when unset. Throws std::invalid_argument for a
/// value that is not a positive integer.
std::optional<std::uint64_t> memory_cap_bytes();

/// Loaded and binarized pair of one case.
struct MaskPair {
  BinaryMask pred;
  BinaryMask gt;
  std::vector<std::string> warnings;
};

/// Loads both masks, thresholding non-binary volumes, and checks they share a geometry.
/// Throws with a message naming the failing file.
MaskPair load_pair(const CaseSource& source, double threshold,
                   std::optional<std::uint64_t> memory_cap);

/// Runs `fn(index)` for every index on up to `jobs` threads. Exceptions are not caught here.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn);

/// Per-case outcome of a batch: either a result or an error message.
template <class R>
struct CaseOutcome {
  std::optional<R> result;
  std::string error;
  std::vector<std::string> warnings;
};

/// Evaluates every case of `manifest` with `metric(pair)` on a worker pool. Outcomes keep
/// manifest order; progress lines go to `err`.
template <class R, class Metric>
std::vector<CaseOutcome<R>> run_cases(const DatasetManifest& manifest, unsigned jobs,
                                      double threshold, std::optional<std::uint64_t> memory_cap,
                                      const char* command, Metric metric, std::ostream& err) {
  std::vector<CaseOutcome<R>> outcomes(manifest.cases.size());
  std::mutex progress;
  std::size_t done = 0;
  parallel_for(manifest.cases.size(), jobs, [&](std::size_t i) {
    const CaseSource& src = manifest.cases[i];
    CaseOutcome<R>& o = outcomes[i];
    try {
      MaskPair pair = load_pair(src, threshold, memory_cap);
      o.warnings = std::move(pair.warnings);
      o.result = metric(pair);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    const std::lock_guard lock(progress);
    ++done;
    err << command << ": [" << done << '/' << manifest.cases.size() << "] " << src.case_id
        << (o.result ? "" : " failed") << '\n';
  });
  return outcomes;
}

}  // namespace voleval::cli
