#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "common.hpp"
#include "voleval/case_table.hpp"
#include "voleval/cohortstats.hpp"
#include "voleval/segmetrics.hpp"

namespace voleval::cli {

namespace {

struct Batch {
  DatasetManifest manifest;
  std::optional<std::uint64_t> memory_cap;
};

// Resolves inputs shared by eval and agree. Returns an exit code on failure.
std::optional<Exit> prepare(Batch& b, const std::optional<fs::path>& manifest,
                            const fs::path& left, const fs::path& right, const std::string& group,
                            std::ostream& err) {
  try {
    b.memory_cap = memory_cap_bytes();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return Exit::usage;
  }
  try {
    b.manifest = manifest ? read_manifest(*manifest) : pair_by_stem(left, right, group);
  } catch (const CsvError& e) {
    err << "error: " << e.what() << '\n';
    return Exit::bad_input;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return Exit::io;
  }
  if (b.manifest.cases.empty()) {
    for (const auto& e : b.manifest.errors) err << "error: " << e << '\n';
    err << "error: no case pairs found\n";
    return Exit::no_pairs;
  }
  return std::nullopt;
}

// Prints warnings and errors in case order; returns the number of failed cases.
template <class R>
std::size_t report_outcomes(const DatasetManifest& m, const std::vector<CaseOutcome<R>>& outcomes,
                            std::ostream& err) {
  std::size_t failed = m.errors.size();
  for (const auto& e : m.errors) err << "error: " << e << '\n';
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    for (const auto& w : outcomes[i].warnings) err << "warning: " << w << '\n';
    if (!outcomes[i].result) {
      err << "error: " << m.cases[i].case_id << ": " << outcomes[i].error << '\n';
      ++failed;
    }
  }
  return failed;
}

std::optional<std::string> summary_path(const std::optional<std::string>& explicit_path,
                                        const std::string& out) {
  if (explicit_path) return explicit_path;
  if (out == "-") return std::nullopt;
  return fs::path(out).replace_extension(".summary.json").string();
}

nlohmann::ordered_json summary_json(const std::vector<double>& values) {
  if (values.empty()) return nullptr;
  const stats::MetricSummary s = stats::summarize(values);
  return {{"mean", s.mean}, {"std", s.std}, {"median", s.median}, {"n", s.n}};
}

}  // namespace

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
  Batch b;
  if (auto fail = prepare(b, o.manifest, o.pred_dir, o.gt_dir, o.group, err)) {
    return code(*fail);
  }
  const auto outcomes = run_cases<CaseMetrics>(
      b.manifest, o.jobs, o.threshold, b.memory_cap, "eval",
      [](const MaskPair& p) { return evaluate_case(p.pred, p.gt); }, err);
  const std::size_t failed = report_outcomes(b.manifest, outcomes, err);

  std::vector<CaseRow> rows;
  std::vector<stats::LabeledCase> labeled;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].result) continue;
    const CaseSource& src = b.manifest.cases[i];
    rows.push_back({src.case_id, *outcomes[i].result});
    labeled.push_back({src.case_id, src.group, *outcomes[i].result, src.pair_key});
  }
  if (rows.empty()) {
    err << "error: every case failed; no output written\n";
    return code(Exit::partial);
  }

  std::string summary;
  try {
    summary = stats::report_to_json(stats::cohort_report(labeled));
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return code(Exit::bad_input);
  }
  std::ostringstream csv;
  write_case_csv(csv, rows);
  if (!write_output(o.out, csv.str(), out, err)) return code(Exit::io);
  if (const auto path = summary_path(o.summary, o.out)) {
    if (!write_output(*path, summary, out, err)) return code(Exit::io);
  }
  err << "eval: " << rows.size() << " cases evaluated, " << failed << " failed\n";
  return code(failed ? Exit::partial : Exit::ok);
}

int cmd_agree(const AgreeOptions& o, std::ostream& out, std::ostream& err) {
  Batch b;
  if (auto fail = prepare(b, std::nullopt, o.rater_a, o.rater_b, "all", err)) {
    return code(*fail);
  }
  struct Agreement {
    double dice;
    std::optional<double> kappa;
  };
  const auto outcomes = run_cases<Agreement>(
      b.manifest, o.jobs, o.threshold, b.memory_cap, "agree",
      [](const MaskPair& p) {
        const ConfusionCounts c = confusion(p.pred, p.gt);
        return Agreement{region_metrics(c).dice, cohen_kappa(c)};
      },
      err);
  const std::size_t failed = report_outcomes(b.manifest, outcomes, err);

  std::ostringstream csv;
  csv << "case_id,dice,kappa\n";
  std::vector<double> dice;
  std::vector<double> kappa;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].result) continue;
    const Agreement& a = *outcomes[i].result;
    csv << b.manifest.cases[i].case_id << ',' << format_g6(a.dice) << ','
        << (a.kappa ? format_g6(*a.kappa) : "") << '\n';
    dice.push_back(a.dice);
    if (a.kappa) kappa.push_back(*a.kappa);
  }
  if (dice.empty()) {
    err << "error: every case failed; no output written\n";
    return code(Exit::partial);
  }
  nlohmann::ordered_json j;
  j["cases"] = dice.size();
  j["dice"] = summary_json(dice);
  j["kappa"] = summary_json(kappa);
  j["kappa_undefined"] = dice.size() - kappa.size();

  if (!write_output(o.out, csv.str(), out, err)) return code(Exit::io);
  if (const auto path = summary_path(o.summary, o.out)) {
    if (!write_output(*path, j.dump(2) + '\n', out, err)) return code(Exit::io);
  }
  err << "agree: " << dice.size() << " cases compared, " << failed << " failed\n";
  return code(failed ? Exit::partial : Exit::ok);
}

}  // namespace voleval::cli
