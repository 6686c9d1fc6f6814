#include <fstream>

#include <json.hpp>

#include "common.hpp"
#include "voleval/case_table.hpp"
#include "voleval/cohortstats.hpp"
#include "voleval/volbounds.hpp"

namespace voleval::cli {

int cmd_volume(const VolumeOptions& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(o.eval_csv);
  if (!in) {
    err << "error: cannot open " << o.eval_csv.string() << '\n';
    return code(Exit::io);
  }
  std::vector<CaseRow> rows;
  try {
    rows = read_case_csv(in);
  } catch (const CsvError& e) {
    err << "error: " << o.eval_csv.string() << ": " << e.what() << '\n';
    return code(Exit::bad_input);
  }
  if (rows.size() < 2) {
    err << "error: volume regression needs at least 2 cases, found " << rows.size() << '\n';
    return code(Exit::bad_input);
  }

  std::vector<double> gt_ml;
  std::vector<double> pred_ml;
  std::vector<double> dice;
  std::vector<double> vpe;
  for (const CaseRow& r : rows) {
    gt_ml.push_back(r.metrics.gt_volume_ml);
    pred_ml.push_back(r.metrics.pred_volume_ml);
    if (r.metrics.vpe) {
      dice.push_back(r.metrics.dice);
      vpe.push_back(*r.metrics.vpe);
    }
  }
  stats::RegressionFit fit;
  try {
    fit = stats::linear_fit(gt_ml, pred_ml);
  } catch (const stats::FitError& e) {
    err << "error: " << e.what() << '\n';
    return code(Exit::bad_input);
  }

  nlohmann::ordered_json j;
  j["cases"] = rows.size();
  j["fit"] = {{"x", "gt_ml"}, {"y", "pred_ml"}, {"slope", fit.slope}, {"intercept", fit.intercept}};
  j["r2"] = fit.r2;
  j["vpe_cases"] = vpe.size();
  if (vpe.empty()) {
    j["mean_dice"] = nullptr;
    j["mean_abs_vpe"] = nullptr;
    j["avpe_bound"] = nullptr;
    j["avpe_within_bound"] = nullptr;
    j["mean_case_upper"] = nullptr;
  } else {
    const bounds::CohortSummary s = bounds::summarize_cohort(dice, vpe);
    j["mean_dice"] = s.mean_dice;
    j["mean_abs_vpe"] = s.mean_abs_vpe;
    j["avpe_bound"] = s.avpe_bound ? nlohmann::ordered_json(*s.avpe_bound) : nullptr;
    j["avpe_within_bound"] = s.avpe_within_bound;
    j["mean_case_upper"] = s.mean_case_upper ? nlohmann::ordered_json(*s.mean_case_upper) : nullptr;
  }
  if (!write_output(o.out, j.dump(2) + '\n', out, err)) return code(Exit::io);
  err << "volume: fitted " << rows.size() << " cases, r2 " << fit.r2 << '\n';
  return code(Exit::ok);
}

}  // namespace voleval::cli
