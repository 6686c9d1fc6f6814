#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "voleval/segmetrics.hpp"
#include "voleval/volbounds.hpp"

namespace voleval::stats {

/// Mean, sample standard deviation (n − 1) and median.
struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
  std::size_t n = 0;
};

/// Throws std::invalid_argument on an empty or non-finite input.
MetricSummary summarize(std::span<const double> values);

struct RegressionFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;  ///< squared Pearson correlation
  std::size_t n = 0;
};

class FitError : public std::invalid_argument {
 public:
  enum class Kind { length_mismatch, too_few_points, constant_x, constant_y };
  FitError(Kind kind, const std::string& what) : std::invalid_argument(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Least-squares y = slope·x + intercept. Throws FitError; constant y is an error because
/// the correlation is undefined.
RegressionFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction (tolerance 1e-12).
double incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom: I_{df/(df+t²)}(df/2, 1/2).
double student_t_two_sided_p(double t, double df);

struct TTestResult {
  enum class Outcome {
    regular,
    no_difference,  ///< all differences zero: t = 0, p = 1
    infinite_t,     ///< constant non-zero difference: |t| = inf, p = 0
  };
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
  double mean_difference = 0.0;
  Outcome outcome = Outcome::regular;
};

/// Paired two-sided t-test on a − b. Throws std::invalid_argument for unequal lengths or n < 2.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Welch's unequal-variance two-sample t-test on mean(a) − mean(b), two-sided, with
/// Welch–Satterthwaite degrees of freedom. Throws std::invalid_argument when either sample
/// has fewer than two values.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// One evaluated case with its cohort label and optional pairing key (e.g. a patient id).
struct LabeledCase {
  std::string case_id;
  std::string group;
  CaseMetrics metrics;
  std::optional<std::string> pair_key;
};

struct GroupReport {
  std::string group;
  std::size_t cases = 0;
  /// Keyed by metric name; a metric with no defined values is left out.
  std::map<std::string, MetricSummary> metrics;
  bounds::CohortSummary volume;
  /// Set when at least one case has a vpe; `volume` then covers those cases.
  bool volume_defined = false;
};

struct GroupDelta {
  std::string from;
  std::string to;
  double dice_delta = 0.0;  ///< mean dice of `to` minus mean dice of `from`
  /// Welch test of `to` dice against `from` dice; needs two cases per group.
  std::optional<TTestResult> unpaired;
  /// Paired test on dice (to − from) over cases sharing a pair key, when pairing was supplied
  /// and at least two keys match.
  std::optional<TTestResult> paired;
  std::size_t paired_cases = 0;
};

struct CohortReport {
  std::vector<GroupReport> groups;  ///< sorted by label
  std::vector<GroupDelta> deltas;   ///< every ordered label pair (a < b)
};

/// Metric names in report order.
std::span<const std::string> report_metric_names();

/// Builds per-group summaries and pairwise Dice deltas. Pairing is used when every case
/// carries a pair key; a key may appear at most once per group. Throws std::invalid_argument
/// for an empty input, a partially keyed cohort, or duplicate keys within a group.
CohortReport cohort_report(std::span<const LabeledCase> cases);

/// JSON text (full double precision, undefined values as null).
std::string report_to_json(const CohortReport& report);

/// One row per group: group,n then mean/std pairs for dice, jaccard, precision, recall,
/// hd95_mm and assd_mm (6 significant digits, empty when undefined).
std::string report_to_csv(const CohortReport& report);

}  // namespace voleval::stats
