#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "voleval/volbounds.hpp"

using namespace voleval;
using namespace voleval::bounds;

TEST_CASE("vpe") {
  CHECK(vpe(100, 100) == 0.0);
  CHECK(vpe(110, 100) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(vpe(0, 100) == -1.0);
  CHECK_THROWS_AS(vpe(1, 0), std::domain_error);
  CHECK_THROWS_AS(vpe(-1, 10), std::domain_error);
}

TEST_CASE("bounds from dice") {
  const auto b94 = vpe_bounds_from_dice(0.94);
  CHECK(b94.upper == doctest::Approx(0.127659574).epsilon(1e-8));
  CHECK(b94.lower == doctest::Approx(-0.113207547).epsilon(1e-8));
  const auto b50 = vpe_bounds_from_dice(0.5);
  CHECK(b50.upper == 2.0);
  CHECK(b50.lower == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  const auto b96 = vpe_bounds_from_dice(0.96);
  CHECK(b96.upper == doctest::Approx(0.0833333).epsilon(1e-6));
  CHECK(std::abs(b96.lower) == doctest::Approx(0.0769231).epsilon(1e-6));
  const auto b1 = vpe_bounds_from_dice(1.0);
  CHECK(b1.upper == 0.0);
  CHECK(b1.lower == 0.0);
  CHECK_THROWS_AS(vpe_bounds_from_dice(0.0), std::domain_error);
  CHECK_THROWS_AS(vpe_bounds_from_dice(1.01), std::domain_error);
  CHECK_THROWS_AS(vpe_bounds_from_dice(std::nan("")), std::domain_error);
}

TEST_CASE("bound ordering on a fine grid") {
  double prev_upper = INFINITY;
  double prev_lower = -INFINITY;
  for (int i = 1; i <= 10000; ++i) {
    const double d = i / 10000.0;
    const auto b = vpe_bounds_from_dice(d);
    CHECK(b.lower <= 0.0);
    CHECK(b.upper >= 0.0);
    CHECK(b.lower >= -1.0);
    if (d < 1.0) CHECK(std::abs(b.lower) < b.upper);
    CHECK(b.upper < prev_upper);
    CHECK(b.lower > prev_lower);
    prev_upper = b.upper;
    prev_lower = b.lower;
  }
}

TEST_CASE("avpe bound values") {
  CHECK(avpe_bound(1.0) == 0.0);
  CHECK(avpe_bound(0.5) == 2.0);
  CHECK(std::abs(avpe_bound(0.8831) - 0.2648) <= 1e-4);
  CHECK(0.1234 <= avpe_bound(0.8831));
  CHECK_THROWS_AS(avpe_bound(0.0), std::domain_error);
}

TEST_CASE("exhaustive enumeration on 3x3x1 finds no violation") {
  const auto r = verify_bounds_exhaustive({3, 3, 1}, 9, 2);
  CHECK(r.violations.empty());
  CHECK(r.ordering_failures == 0);
  CHECK(r.worst_margin <= 1e-12);
  // every pair with a shared voxel: 4^9 − 3^9
  std::uint64_t expected = 0;
  for (std::uint64_t g = 1; g < 512; ++g) {
    for (std::uint64_t p = 0; p < 512; ++p) {
      if (p & g) ++expected;
    }
  }
  CHECK(r.pairs_checked == expected);
  CHECK(expected == 242461);
  CHECK(verify_bounds_exhaustive({2, 2, 1}).pairs_checked == 175);
  CHECK_THROWS_AS(verify_bounds_exhaustive({4, 4, 1}), std::invalid_argument);
  CHECK_THROWS_AS(verify_bounds_exhaustive({4, 4, 1}, 16), std::invalid_argument);
}

TEST_CASE("threaded enumeration agrees with serial") {
  const auto a = verify_bounds_exhaustive({2, 2, 2}, 9, 1);
  const auto b = verify_bounds_exhaustive({2, 2, 2}, 9, 4);
  CHECK(a.pairs_checked == b.pairs_checked);
  CHECK(a.worst_margin == b.worst_margin);
}

TEST_CASE("sampled pairs find no violation") {
  const auto r = verify_bounds_sampled({8, 8, 8}, 2000, 7);
  CHECK(r.pairs_checked == 2000);
  CHECK(r.violations.empty());
  CHECK(r.ordering_failures == 0);
}

TEST_CASE("nested masks attain the bounds") {
  for (std::size_t n : {2, 5, 16, 64, 200}) CHECK(nested_bound_gap(n) <= 1e-12);
}

TEST_CASE("curve rows and grid validation") {
  const auto grid = dice_range(0.9, 1.0, 0.02);
  REQUIRE(grid.size() == 6);
  CHECK(grid.back() == 1.0);
  const auto rows = bound_curve(grid);
  CHECK(rows[2].dice == doctest::Approx(0.94));
  CHECK(rows[2].upper == doctest::Approx(0.127659574));
  CHECK(rows[2].abs_lower == -rows[2].lower);
  CHECK(rows[2].abs_upper == rows[2].upper);
  const std::vector<double> one{1.0};
  const auto r1 = bound_curve(one);
  CHECK(r1[0].lower == 0.0);
  CHECK(r1[0].upper == 0.0);
  CHECK(r1[0].abs_lower == 0.0);

  std::ostringstream os;
  write_curve_csv(os, bound_curve(std::vector<double>{0.94, 1.0}));
  CHECK(os.str() ==
        "dice,vpe_lower,vpe_upper,abs_lower,abs_upper\n"
        "0.94,-0.113208,0.12766,0.113208,0.12766\n"
        "1,0,0,0,0\n");

  CHECK_THROWS_AS(dice_range(0.5, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dice_range(0.5, 1.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(dice_range(0.0, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(dice_range(0.5, 1.1, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(dice_range(0.9, 0.5, 0.1), std::invalid_argument);
  CHECK(dice_range(0.1, 1.0, 0.1).size() == 10);
}

TEST_CASE("cohort summary") {
  const std::vector<double> dice{1.0, 1.0};
  const std::vector<double> v{0.0, 0.0};
  const auto s = summarize_cohort(dice, v);
  CHECK(s.mean_abs_vpe == 0.0);
  CHECK(*s.avpe_bound == 0.0);
  CHECK(s.avpe_within_bound);
  CHECK(*s.mean_case_upper == 0.0);
  CHECK_THROWS(summarize_cohort(dice, std::vector<double>{0.0}));
  CHECK_THROWS(summarize_cohort(std::vector<double>{}, std::vector<double>{}));
}

TEST_CASE("the mean-dice cohort bound can fail while every case respects its own bound") {
  // Case A: dice 0.5 with vpe 2 (attained by gt ⊂ pred, |pred| = 3|gt|); case B: perfect.
  const std::vector<double> dice{0.5, 1.0};
  const std::vector<double> v{2.0, 0.0};
  const auto s = summarize_cohort(dice, v);
  CHECK(s.case_violations == std::vector<bool>{false, false});
  CHECK(s.mean_abs_vpe == 1.0);
  CHECK(*s.avpe_bound == doctest::Approx(2.0 / 0.75 - 2.0));
  CHECK_FALSE(s.avpe_within_bound);
  // The per-case mean bound always holds.
  CHECK(*s.mean_case_upper == 1.0);
  CHECK(s.mean_abs_vpe <= *s.mean_case_upper);
}

TEST_CASE("random cohorts of realizable cases respect the per-case mean bound") {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> size(1, 400);
  for (int cohort = 0; cohort < 200; ++cohort) {
    std::vector<double> dice;
    std::vector<double> v;
    for (int c = 0; c < 12; ++c) {
      const int g = size(rng);
      const int p = size(rng);
      const int tp = std::uniform_int_distribution<int>(1, std::min(g, p))(rng);
      dice.push_back(2.0 * tp / (g + p));
      v.push_back(static_cast<double>(p) / g - 1.0);
    }
    const auto s = summarize_cohort(dice, v);
    for (bool violated : s.case_violations) CHECK_FALSE(violated);
    CHECK(s.mean_abs_vpe <= *s.mean_case_upper + 1e-12);
  }
}
