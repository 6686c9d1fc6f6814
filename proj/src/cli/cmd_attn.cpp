#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "common.hpp"
#include "voleval/attention_bench.hpp"

namespace voleval::cli {

int cmd_attn_check(const AttnCheckOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<attn::CheckResult> results;
  try {
    results = attn::run_attention_checks(o.checks);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return code(Exit::usage);
  }
  std::ostringstream report;
  report << "check,max_error,tolerance,status\n";
  bool ok = true;
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%.3e,%.0e,%s\n", r.name.c_str(), r.max_error,
                  r.tolerance, r.passed() ? "pass" : "FAIL");
    report << line;
    ok = ok && r.passed();
  }
  err << report.str();
  if (o.out && !write_output(*o.out, report.str(), out, err)) return code(Exit::io);
  for (const auto& r : results) {
    if (!r.passed()) err << "attn-check: " << r.name << " failed\n";
  }
  return code(ok ? Exit::ok : Exit::check_failed);
}

int cmd_attn_bench(const AttnBenchOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<attn::BenchRow> rows;
  try {
    for (const auto& [variant, sizes] : {std::pair{attn::Variant::linear, &o.linear_n},
                                         std::pair{attn::Variant::quadratic, &o.quadratic_n}}) {
      if (sizes->empty()) continue;
      err << "attn-bench: timing " << attn::variant_name(variant) << " kernel\n";
      const auto part = attn::bench_attention(*sizes, o.d, o.repeats, variant, o.seed);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return code(Exit::usage);
  } catch (const std::length_error& e) {
    err << "error: " << e.what() << '\n';
    return code(Exit::usage);
  }
  std::ostringstream csv;
  attn::write_bench_csv(csv, rows);
  for (const auto variant : {attn::Variant::linear, attn::Variant::quadratic}) {
    if (const auto slope = attn::loglog_slope(rows, variant)) {
      char line[96];
      std::snprintf(line, sizeof line, "#slope,%s,%.4f\n",
                    std::string(attn::variant_name(variant)).c_str(), *slope);
      csv << line;
      err << "attn-bench: " << attn::variant_name(variant) << " log-log slope " << *slope << '\n';
    }
  }
  return code(write_output(o.out, csv.str(), out, err) ? Exit::ok : Exit::io);
}

}  // namespace voleval::cli
