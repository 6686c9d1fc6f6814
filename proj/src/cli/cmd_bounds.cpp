#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "common.hpp"
#include "voleval/case_table.hpp"
#include "voleval/volbounds.hpp"

namespace voleval::cli {

namespace {

// Slack for values that went through 6-significant-digit CSV cells: a dice rounding error
// of up to 5e-6·dice moves 2/dice − 2 by about 1e-5/dice, and vpe itself carries 5e-6·|vpe|.
double audit_tolerance(double dice, double vpe) { return 1e-5 / dice + 5e-6 * std::abs(vpe) + 1e-12; }

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

int run_curve(const BoundsOptions& o, std::ostream& out, std::ostream& err) {
  const auto& [lo, hi, step] = *o.curve;
  std::vector<double> grid;
  try {
    grid = bounds::dice_range(lo, hi, step);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return code(Exit::usage);
  }
  std::ostringstream csv;
  bounds::write_curve_csv(csv, bounds::bound_curve(grid));
  if (!write_output(o.out, csv.str(), out, err)) return code(Exit::io);
  err << "bounds: " << grid.size() << " curve rows\n";
  return code(Exit::ok);
}

int run_audit(const BoundsOptions& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(*o.audit);
  if (!in) {
    err << "error: cannot open " << o.audit->string() << '\n';
    return code(Exit::io);
  }
  std::vector<CaseRow> rows;
  try {
    rows = read_case_csv(in);
  } catch (const CsvError& e) {
    err << "error: " << o.audit->string() << ": " << e.what() << '\n';
    return code(Exit::bad_input);
  }

  nlohmann::ordered_json violations = nlohmann::ordered_json::array();
  std::vector<double> dice;
  std::vector<double> vpe;
  for (const CaseRow& r : rows) {
    const CaseMetrics& m = r.metrics;
    if (!m.vpe || !(m.dice > 0.0)) continue;
    if (m.dice > 1.0) {
      err << "error: " << r.case_id << ": dice " << format_g6(m.dice) << " exceeds 1\n";
      return code(Exit::bad_input);
    }
    const bounds::VpeBounds b = bounds::vpe_bounds_from_dice(m.dice);
    const double tol = audit_tolerance(m.dice, *m.vpe);
    dice.push_back(m.dice);
    vpe.push_back(*m.vpe);
    if (*m.vpe > b.upper + tol || *m.vpe < b.lower - tol) {
      violations.push_back({{"case_id", r.case_id},
                            {"dice", m.dice},
                            {"vpe", *m.vpe},
                            {"lower", b.lower},
                            {"upper", b.upper}});
      err << "violation: " << r.case_id << " vpe " << format_g6(*m.vpe) << " outside ["
          << format_g6(b.lower) << ", " << format_g6(b.upper) << "]\n";
    }
  }

  nlohmann::ordered_json report;
  report["rows"] = rows.size();
  report["checked"] = dice.size();
  report["skipped"] = rows.size() - dice.size();
  report["violation_count"] = violations.size();
  report["violations"] = violations;
  if (!dice.empty()) {
    const bounds::CohortSummary s = bounds::summarize_cohort(dice, vpe);
    report["cohort"] = {{"mean_dice", s.mean_dice},
                        {"mean_abs_vpe", s.mean_abs_vpe},
                        {"avpe_bound", optional_json(s.avpe_bound)},
                        {"avpe_within_bound", s.avpe_within_bound},
                        {"mean_case_upper", optional_json(s.mean_case_upper)}};
  } else {
    report["cohort"] = nullptr;
  }
  if (!write_output(o.out, report.dump(2) + '\n', out, err)) return code(Exit::io);
  err << "bounds: audited " << dice.size() << " of " << rows.size() << " rows, "
      << violations.size() << " violations\n";
  return code(violations.empty() ? Exit::ok : Exit::check_failed);
}

}  // namespace

int cmd_bounds(const BoundsOptions& o, std::ostream& out, std::ostream& err) {
  if (o.curve.has_value() == o.audit.has_value()) {
    err << "error: bounds needs exactly one of --curve or --audit\n";
    return code(Exit::usage);
  }
  return o.curve ? run_curve(o, out, err) : run_audit(o, out, err);
}

}  // namespace voleval::cli
