#include <algorithm>
#include <cmath>
#include <exception>

#include <CLI11.hpp>

#include "common.hpp"

namespace voleval::cli {

namespace {

void add_threshold(CLI::App* cmd, double& threshold) {
  cmd->add_option("--threshold", threshold, "Binarize non-binary volumes at value > threshold")
      ->capture_default_str();
}

void add_jobs(CLI::App* cmd, unsigned& jobs) {
  cmd->add_option("--jobs,-j", jobs, "Worker threads")
      ->check(CLI::Range(1U, 1024U))
      ->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Volumetric segmentation evaluation and attention kernel checks", "voleval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "voleval 1.0.0");

  EvalOptions eval;
  std::string manifest;
  auto* eval_cmd = app.add_subcommand("eval", "Per-case metrics and cohort summary for a dataset");
  eval_cmd->add_option("pred_dir", eval.pred_dir, "Directory of predicted masks");
  eval_cmd->add_option("gt_dir", eval.gt_dir, "Directory of reference masks");
  eval_cmd->add_option("--manifest", manifest,
                       "CSV case_id,pred_path,gt_path,group[,pair_key] instead of directories");
  eval_cmd->add_option("--group", eval.group, "Group label for directory input")->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Per-case CSV path, - for stdout")->required();
  eval_cmd->add_option("--summary", eval.summary, "Summary JSON path");
  add_threshold(eval_cmd, eval.threshold);
  add_jobs(eval_cmd, eval.jobs);

  AgreeOptions agree;
  auto* agree_cmd = app.add_subcommand("agree", "Dice and Cohen's kappa between two raters");
  agree_cmd->add_option("rater_a", agree.rater_a, "Directory of rater A masks")->required();
  agree_cmd->add_option("rater_b", agree.rater_b, "Directory of rater B masks")->required();
  agree_cmd->add_option("--out", agree.out, "Agreement CSV path, - for stdout")->required();
  agree_cmd->add_option("--summary", agree.summary, "Summary JSON path");
  add_threshold(agree_cmd, agree.threshold);
  add_jobs(agree_cmd, agree.jobs);

  BoundsOptions bounds;
  std::vector<double> curve;
  std::string audit;
  auto* bounds_cmd = app.add_subcommand("bounds", "Dice/volume-error bound curve or audit");
  auto* curve_opt = bounds_cmd->add_option("--curve", curve, "DICE_MIN DICE_MAX STEP")->expected(3);
  auto* audit_opt = bounds_cmd->add_option("--audit", audit, "Per-case CSV written by eval");
  curve_opt->excludes(audit_opt);
  bounds_cmd->add_option("--out", bounds.out, "Output path, - for stdout")->required();

  AttnCheckOptions check;
  std::string check_out;
  bool inject_fault = false;
  auto* check_cmd = app.add_subcommand("attn-check", "Property and gradient checks of the attention kernels");
  check_cmd->add_option("--n", check.checks.n, "Tokens")->check(CLI::Range(1, 4096))->capture_default_str();
  check_cmd->add_option("--d", check.checks.d, "Channels")->check(CLI::Range(1, 4096))->capture_default_str();
  check_cmd->add_option("--seed", check.checks.seed, "Random seed")->capture_default_str();
  check_cmd->add_option("--trials", check.checks.trials, "Random instances")
      ->check(CLI::Range(1, 1000000))
      ->capture_default_str();
  check_cmd->add_flag("--inject-fault", inject_fault,
                      "Test hook: flip the sign of dV in the backward pass");
  check_cmd->add_option("--out", check_out, "Also write the report here, - for stdout");

  AttnBenchOptions bench;
  auto* bench_cmd = app.add_subcommand("attn-bench", "Time both kernels and fit log-log slopes");
  bench_cmd->add_option("--n-list", bench.linear_n, "Token counts for the linear kernel")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--quad-n-list", bench.quadratic_n, "Token counts for the quadratic kernel")
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--d", bench.d, "Channels")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--repeats", bench.repeats, "Runs per size (median reported)")
      ->check(CLI::Range(3, 1000))
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Random seed")->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "CSV path, - for stdout")->required();

  VolumeOptions volume;
  auto* volume_cmd = app.add_subcommand("volume", "Predicted vs reference volume regression");
  volume_cmd->add_option("eval_csv", volume.eval_csv, "Per-case CSV written by eval")->required();
  volume_cmd->add_option("--out", volume.out, "JSON path, - for stdout")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? code(Exit::ok) : code(Exit::usage);
  }

  if (!std::isfinite(eval.threshold) || !std::isfinite(agree.threshold)) {
    err << "error: --threshold must be finite\n";
    return code(Exit::usage);
  }
  try {
    if (*eval_cmd) {
      if (!manifest.empty()) {
        if (!eval.pred_dir.empty() || !eval.gt_dir.empty()) {
          err << "error: give either --manifest or the two directories, not both\n";
          return code(Exit::usage);
        }
        eval.manifest = manifest;
      } else if (eval.pred_dir.empty() || eval.gt_dir.empty()) {
        err << "error: eval needs pred_dir and gt_dir (or --manifest)\n";
        return code(Exit::usage);
      }
      return cmd_eval(eval, out, err);
    }
    if (*agree_cmd) return cmd_agree(agree, out, err);
    if (*bounds_cmd) {
      if (!curve.empty()) bounds.curve = std::array<double, 3>{curve[0], curve[1], curve[2]};
      if (!audit.empty()) bounds.audit = audit;
      return cmd_bounds(bounds, out, err);
    }
    if (*check_cmd) {
      if (inject_fault) check.checks.fault = attn::GradientFault::flip_dv_sign;
      if (!check_out.empty()) check.out = check_out;
      return cmd_attn_check(check, out, err);
    }
    if (*bench_cmd) {
      const auto non_positive = [](const std::vector<std::uint64_t>& v) {
        return std::any_of(v.begin(), v.end(), [](std::uint64_t n) { return n == 0; });
      };
      if (non_positive(bench.linear_n) || non_positive(bench.quadratic_n)) {
        err << "error: token counts must be positive\n";
        return code(Exit::usage);
      }
      return cmd_attn_bench(bench, out, err);
    }
    if (*volume_cmd) return cmd_volume(volume, out, err);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return code(Exit::internal);
  }
  return code(Exit::usage);
}

}  // namespace voleval::cli
