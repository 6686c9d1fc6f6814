#include "voleval/cohortstats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace voleval::stats {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

bool all_equal(std::span<const double> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

// Continued fraction for I_x(a, b), modified Lentz.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kTol = 1e-12;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double dm = m;
    const double m2 = 2.0 * dm;
    double aa = dm * (b - dm) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + dm) * (qab + dm) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double step = d * c;
    h *= step;
    if (std::abs(step - 1.0) < kTol) {
      return h;
    }
  }
  throw std::runtime_error("incomplete beta continued fraction did not converge");
}

// I_x(a, b) given both x and 1 − x, so callers can pass a complement computed without
// cancellation.
double incomplete_beta_split(double a, double b, double x, double one_minus_x) {
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(one_minus_x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, one_minus_x) / b;
}

std::string fmt6(std::optional<double> v) {
  if (!v) return "";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", *v);
  return buf;
}

std::string outcome_name(TTestResult::Outcome o) {
  switch (o) {
    case TTestResult::Outcome::regular: return "regular";
    case TTestResult::Outcome::no_difference: return "no_difference";
    case TTestResult::Outcome::infinite_t: return "infinite_t";
  }
  return "unknown";
}

nlohmann::ordered_json optional_json(std::optional<double> v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

MetricSummary summarize(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("cannot summarize an empty list");
  }
  if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); })) {
    throw std::invalid_argument("cannot summarize non-finite values");
  }
  MetricSummary s;
  s.n = values.size();
  s.mean = mean_of(values);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - s.mean) * (v - s.mean);
    }
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = s.n / 2;
  s.median = s.n % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

RegressionFit linear_fit(std::span<const double> x, std::span<const double> y) {
  using K = FitError::Kind;
  if (x.size() != y.size()) {
    throw FitError(K::length_mismatch, "x and y have different lengths");
  }
  if (x.size() < 2) {
    throw FitError(K::too_few_points, "a linear fit needs at least two points");
  }
  if (all_equal(x)) {
    throw FitError(K::constant_x, "x is constant; slope is undefined");
  }
  if (all_equal(y)) {
    throw FitError(K::constant_y, "y is constant; correlation is undefined");
  }
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  RegressionFit fit;
  fit.n = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return fit;
}

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0) || !(x >= 0.0 && x <= 1.0)) {
    throw std::domain_error("incomplete beta needs a, b > 0 and 0 <= x <= 1");
  }
  return incomplete_beta_split(a, b, x, 1.0 - x);
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) {
    throw std::domain_error("degrees of freedom must be positive");
  }
  if (std::isinf(t)) return 0.0;
  if (std::isnan(t)) throw std::domain_error("t statistic is NaN");
  const double t2 = t * t;
  const double denom = df + t2;
  return std::clamp(incomplete_beta_split(df / 2.0, 0.5, df / denom, t2 / denom), 0.0, 1.0);
}

TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("paired t-test needs equal-length samples");
  }
  if (a.size() < 2) {
    throw std::invalid_argument("paired t-test needs at least two pairs");
  }
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff[i] = a[i] - b[i];
  }
  const double n = static_cast<double>(diff.size());
  TTestResult r;
  r.df = n - 1.0;
  r.mean_difference = mean_of(diff);
  if (all_equal(diff)) {
    if (r.mean_difference == 0.0) {
      r.outcome = TTestResult::Outcome::no_difference;
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.outcome = TTestResult::Outcome::infinite_t;
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
      r.p = 0.0;
    }
    return r;
  }
  double ss = 0.0;
  for (double d : diff) {
    ss += (d - r.mean_difference) * (d - r.mean_difference);
  }
  const double sd = std::sqrt(ss / (n - 1.0));
  r.t = r.mean_difference / (sd / std::sqrt(n));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) {
    throw std::invalid_argument("Welch t-test needs at least two values per sample");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  auto sample_var = [](std::span<const double> v, double m) {
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
  };
  const double qa = sample_var(a, ma) / na;
  const double qb = sample_var(b, mb) / nb;
  TTestResult r;
  r.mean_difference = ma - mb;
  if (qa + qb == 0.0) {
    r.df = na + nb - 2.0;
    if (r.mean_difference == 0.0) {
      r.outcome = TTestResult::Outcome::no_difference;
    } else {
      r.outcome = TTestResult::Outcome::infinite_t;
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
      r.p = 0.0;
    }
    return r;
  }
  r.t = r.mean_difference / std::sqrt(qa + qb);
  r.df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

std::span<const std::string> report_metric_names() {
  static const std::array<std::string, 10> names{"dice",    "jaccard", "precision", "recall",
                                                 "hd95_mm", "assd_mm", "pred_ml",   "gt_ml",
                                                 "vpe",     "abs_vpe"};
  return names;
}

CohortReport cohort_report(std::span<const LabeledCase> cases) {
  if (cases.empty()) {
    throw std::invalid_argument("cohort report needs at least one case");
  }
  const auto keyed = std::count_if(cases.begin(), cases.end(),
                                    [](const LabeledCase& c) { return c.pair_key.has_value(); });
  if (keyed != 0 && static_cast<std::size_t>(keyed) != cases.size()) {
    throw std::invalid_argument("pairing keys must be given for all cases or none");
  }
  const bool paired = keyed != 0;

  std::map<std::string, std::vector<const LabeledCase*>> by_group;
  for (const auto& c : cases) {
    by_group[c.group].push_back(&c);
  }

  CohortReport report;
  std::map<std::string, std::map<std::string, double>> dice_by_key;
  std::map<std::string, std::vector<double>> dice_by_group;
  for (const auto& [label, members] : by_group) {
    GroupReport g;
    g.group = label;
    g.cases = members.size();

    std::map<std::string, std::vector<double>> columns;
    std::vector<double> vol_dice;
    std::vector<double> vol_vpe;
    for (const LabeledCase* c : members) {
      const CaseMetrics& m = c->metrics;
      columns["dice"].push_back(m.dice);
      columns["jaccard"].push_back(m.jaccard);
      if (m.precision) columns["precision"].push_back(*m.precision);
      if (m.recall) columns["recall"].push_back(*m.recall);
      if (m.hd95_mm) columns["hd95_mm"].push_back(*m.hd95_mm);
      if (m.assd_mm) columns["assd_mm"].push_back(*m.assd_mm);
      columns["pred_ml"].push_back(m.pred_volume_ml);
      columns["gt_ml"].push_back(m.gt_volume_ml);
      if (m.vpe) {
        columns["vpe"].push_back(*m.vpe);
        columns["abs_vpe"].push_back(std::abs(*m.vpe));
        vol_dice.push_back(m.dice);
        vol_vpe.push_back(*m.vpe);
      }
      if (paired) {
        auto& keys = dice_by_key[label];
        if (!keys.emplace(*c->pair_key, m.dice).second) {
          throw std::invalid_argument("pair key '" + *c->pair_key + "' repeats in group '" +
                                      label + "'");
        }
      }
    }
    for (const auto& name : report_metric_names()) {
      const auto it = columns.find(name);
      if (it != columns.end() && !it->second.empty()) {
        g.metrics.emplace(name, summarize(it->second));
      }
    }
    dice_by_group[label] = columns["dice"];
    if (!vol_dice.empty()) {
      g.volume = bounds::summarize_cohort(vol_dice, vol_vpe);
      g.volume_defined = true;
    }
    report.groups.push_back(std::move(g));
  }

  for (std::size_t i = 0; i < report.groups.size(); ++i) {
    for (std::size_t j = i + 1; j < report.groups.size(); ++j) {
      const GroupReport& from = report.groups[i];
      const GroupReport& to = report.groups[j];
      GroupDelta delta;
      delta.from = from.group;
      delta.to = to.group;
      delta.dice_delta = to.metrics.at("dice").mean - from.metrics.at("dice").mean;
      const auto& to_dice = dice_by_group[to.group];
      const auto& from_dice = dice_by_group[from.group];
      if (to_dice.size() >= 2 && from_dice.size() >= 2) {
        delta.unpaired = welch_t_test(to_dice, from_dice);
      }
      if (paired) {
        std::vector<double> a;
        std::vector<double> b;
        const auto& from_keys = dice_by_key[from.group];
        for (const auto& [key, dice] : dice_by_key[to.group]) {
          if (const auto it = from_keys.find(key); it != from_keys.end()) {
            a.push_back(dice);
            b.push_back(it->second);
          }
        }
        delta.paired_cases = a.size();
        if (a.size() >= 2) {
          delta.paired = paired_t_test(a, b);
        }
      }
      report.deltas.push_back(std::move(delta));
    }
  }
  return report;
}

std::string report_to_json(const CohortReport& report) {
  using json = nlohmann::ordered_json;
  json root;
  root["groups"] = json::array();
  for (const auto& g : report.groups) {
    json jg;
    jg["group"] = g.group;
    jg["cases"] = g.cases;
    jg["metrics"] = json::object();
    for (const auto& name : report_metric_names()) {
      if (const auto it = g.metrics.find(name); it != g.metrics.end()) {
        jg["metrics"][name] = {{"mean", it->second.mean},
                               {"std", it->second.std},
                               {"median", it->second.median},
                               {"n", it->second.n}};
      }
    }
    if (g.volume_defined) {
      const auto& v = g.volume;
      jg["volume"] = {
          {"cases", v.case_violations.size()},
          {"mean_dice", v.mean_dice},
          {"mean_abs_vpe", v.mean_abs_vpe},
          {"avpe_bound", optional_json(v.avpe_bound)},
          {"avpe_within_bound", v.avpe_within_bound},
          {"mean_case_upper", optional_json(v.mean_case_upper)},
          {"case_violations",
           std::count(v.case_violations.begin(), v.case_violations.end(), true)}};
    } else {
      jg["volume"] = nullptr;
    }
    root["groups"].push_back(std::move(jg));
  }
  root["deltas"] = json::array();
  for (const auto& d : report.deltas) {
    json jd;
    jd["from"] = d.from;
    jd["to"] = d.to;
    jd["dice_delta"] = d.dice_delta;
    auto test_json = [](const std::optional<TTestResult>& r) {
      if (!r) return json(nullptr);
      return json{{"t", std::isfinite(r->t) ? json(r->t) : json(nullptr)},
                  {"df", r->df},
                  {"p", r->p},
                  {"outcome", outcome_name(r->outcome)}};
    };
    jd["welch_t_test"] = test_json(d.unpaired);
    jd["paired_cases"] = d.paired_cases;
    jd["paired_t_test"] = test_json(d.paired);
    root["deltas"].push_back(std::move(jd));
  }
  return root.dump(2) + "\n";
}

std::string report_to_csv(const CohortReport& report) {
  static const std::array<const char*, 6> columns{"dice",    "jaccard", "precision",
                                                  "recall",  "hd95_mm", "assd_mm"};
  std::ostringstream os;
  os << "group,n";
  for (const char* c : columns) {
    os << ',' << c << "_mean," << c << "_std";
  }
  os << '\n';
  for (const auto& g : report.groups) {
    os << g.group << ',' << g.cases;
    for (const char* c : columns) {
      const auto it = g.metrics.find(c);
      if (it == g.metrics.end()) {
        os << ",,";
      } else {
        os << ',' << fmt6(it->second.mean) << ',' << fmt6(it->second.std);
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace voleval::stats
