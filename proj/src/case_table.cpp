#include "voleval/case_table.hpp"

#include <charconv>
#include <cstdio>
#include <optional>

namespace voleval {

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_g6(*v) : std::string(); }

std::optional<double> parse_cell(const std::string& text, std::size_t line_no,
                                 std::string_view column) {
  if (text.empty()) {
    return std::nullopt;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw CsvError("line " + std::to_string(line_no) + ": cannot parse " + std::string(column) +
                   " value '" + text + "'");
  }
  return v;
}

double require_cell(const std::string& text, std::size_t line_no, std::string_view column) {
  const auto v = parse_cell(text, line_no, column);
  if (!v) {
    throw CsvError("line " + std::to_string(line_no) + ": " + std::string(column) +
                   " must not be empty");
  }
  return *v;
}

}  // namespace

std::string format_g6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') {
    line.remove_suffix(1);
  }
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_case_row(const CaseRow& row) {
  const CaseMetrics& m = row.metrics;
  return row.case_id + ',' + format_g6(m.dice) + ',' + format_g6(m.jaccard) + ',' +
         cell(m.precision) + ',' + cell(m.recall) + ',' + cell(m.hd95_mm) + ',' +
         cell(m.assd_mm) + ',' + format_g6(m.pred_volume_ml) + ',' + format_g6(m.gt_volume_ml) +
         ',' + cell(m.vpe);
}

void write_case_csv(std::ostream& os, std::span<const CaseRow> rows) {
  os << kCaseCsvHeader << '\n';
  for (const auto& r : rows) {
    os << format_case_row(r) << '\n';
  }
}

std::vector<CaseRow> read_case_csv(std::istream& is) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line)) {
    throw CsvError("empty case table");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCaseCsvHeader) {
    throw CsvError("line 1: unexpected header '" + line + "'");
  }
  std::vector<CaseRow> rows;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 10) {
      throw CsvError("line " + std::to_string(line_no) + ": expected 10 columns, found " +
                     std::to_string(f.size()));
    }
    CaseRow r;
    r.case_id = f[0];
    CaseMetrics& m = r.metrics;
    m.dice = require_cell(f[1], line_no, "dice");
    m.jaccard = require_cell(f[2], line_no, "jaccard");
    m.precision = parse_cell(f[3], line_no, "precision");
    m.recall = parse_cell(f[4], line_no, "recall");
    m.hd95_mm = parse_cell(f[5], line_no, "hd95_mm");
    m.assd_mm = parse_cell(f[6], line_no, "assd_mm");
    m.pred_volume_ml = require_cell(f[7], line_no, "pred_ml");
    m.gt_volume_ml = require_cell(f[8], line_no, "gt_ml");
    m.vpe = parse_cell(f[9], line_no, "vpe");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace voleval
