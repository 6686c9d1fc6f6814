#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "voleval/segmetrics.hpp"

namespace voleval {

inline constexpr std::string_view kCaseCsvHeader =
    "case_id,dice,jaccard,precision,recall,hd95_mm,assd_mm,pred_ml,gt_ml,vpe";

struct CaseRow {
  std::string case_id;
  CaseMetrics metrics;
};

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Values are printed with 6 significant digits; undefined values leave the cell empty.
std::string format_case_row(const CaseRow& row);
void write_case_csv(std::ostream& os, std::span<const CaseRow> rows);

/// Parses a table written by write_case_csv. Throws CsvError (with line number) on a wrong
/// header, wrong column count, or unparseable number.
std::vector<CaseRow> read_case_csv(std::istream& is);

/// printf("%.6g")
std::string format_g6(double v);

/// Splits one CSV line on commas (no quoting; case ids must not contain commas).
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace voleval
