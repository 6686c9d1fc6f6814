#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "voleval/attention_bench.hpp"
#include "voleval/attention_checks.hpp"
#include "voleval/linattn.hpp"

using namespace voleval;
using namespace voleval::attn;

namespace {

Matrix<double> randn(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix<double> m(r, c);
  for (double& x : m.flat()) x = dist(rng);
  return m;
}

double max_diff(const Matrix<double>& a, const Matrix<double>& b) {
  REQUIRE(a.same_shape(b));
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) w = std::max(w, std::abs(a.flat()[i] - b.flat()[i]));
  return w;
}

double dot(const Matrix<double>& a, const Matrix<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.flat()[i] * b.flat()[i];
  return s;
}

}  // namespace

TEST_CASE("tensors reject bad shapes and values") {
  Matrix<double> a(3, 2, 0.0);
  Matrix<double> b(3, 3, 0.0);
  CHECK_THROWS_AS(AttentionTensors<double>(a, a, b), std::invalid_argument);
  CHECK_THROWS_AS(AttentionTensors<double>(Matrix<double>(), Matrix<double>(), Matrix<double>()),
                  std::invalid_argument);
  Matrix<double> bad = a;
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(AttentionTensors<double>(a, bad, a), std::invalid_argument);
}

TEST_CASE("kernels match the naive three-loop oracles") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 24;
    const std::size_t d = 1 + rng() % 8;
    const auto q = randn(n, d, rng, 2.0);
    const auto k = randn(n, d, rng, 2.0);
    const auto v = randn(n, d, rng);
    const AttentionTensors<double> t(q, k, v);
    CHECK(max_diff(linear_attention(t).out, oracle::linear_attention(q, k, v)) <= 1e-12);
    CHECK(max_diff(quadratic_attention(t).out, oracle::quadratic_attention(q, k, v)) <= 1e-12);
    CHECK(max_diff(implied_weights(t), oracle::linear_weights(q, k)) <= 1e-14);
  }
}

TEST_CASE("implied weights are row stochastic and non-negative") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 64;
    const std::size_t d = 1 + rng() % 16;
    const AttentionTensors<double> t(randn(n, d, rng, 3.0), randn(n, d, rng, 3.0), randn(n, d, rng));
    const auto w = implied_weights(t);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = w.row(i);
      CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-9);
      CHECK(*std::min_element(row.begin(), row.end()) >= 0.0);
    }
  }
}

TEST_CASE("softmax is stable for large logits") {
  Matrix<double> m(2, 3, std::vector<double>{1000, 1001, 1002, -1000, -1001, -1002});
  const auto r = softmax_rows(m);
  for (double x : r.flat()) CHECK(std::isfinite(x));
  CHECK(r(0, 2) > r(0, 1));
  CHECK(r(0, 0) + r(0, 1) + r(0, 2) == doctest::Approx(1.0).epsilon(1e-15));
  const auto c = softmax_cols(m);
  CHECK(c(0, 0) + c(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("single token attention returns the value row") {
  std::mt19937_64 rng(9);
  const auto v = randn(1, 4, rng);
  const AttentionTensors<double> t(randn(1, 4, rng), randn(1, 4, rng), v);
  CHECK(max_diff(linear_attention(t).out, v) <= 1e-15);
  CHECK(max_diff(quadratic_attention(t).out, v) <= 1e-15);
}

TEST_CASE("float kernels agree with double within single precision") {
  std::mt19937_64 rng(21);
  const auto q = randn(32, 8, rng);
  const auto k = randn(32, 8, rng);
  const auto v = randn(32, 8, rng);
  auto to_float = [](const Matrix<double>& m) {
    Matrix<float> f(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i) f.flat()[i] = static_cast<float>(m.flat()[i]);
    return f;
  };
  const AttentionTensors<float> tf(to_float(q), to_float(k), to_float(v));
  const auto ref = linear_attention(AttentionTensors<double>(q, k, v)).out;
  const auto got = linear_attention(tf).out;
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(got.flat()[i] - ref.flat()[i]) < 1e-5);
}

TEST_CASE("backward matches an independent finite-difference oracle") {
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    const std::size_t d = 1 + rng() % 4;
    auto q = randn(n, d, rng);
    auto k = randn(n, d, rng);
    auto v = randn(n, d, rng);
    const auto u = randn(n, d, rng);
    const auto g = linear_attention_backward(AttentionTensors<double>(q, k, v), u);
    auto loss = [&] { return dot(oracle::linear_attention(q, k, v), u); };
    const auto fq = oracle::finite_difference(q, loss, 1e-5);
    const auto fk = oracle::finite_difference(k, loss, 1e-5);
    const auto fv = oracle::finite_difference(v, loss, 1e-5);
    worst = std::max({worst, max_diff(g.dq, fq), max_diff(g.dk, fk), max_diff(g.dv, fv)});
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("the fault hook breaks the gradient") {
  std::mt19937_64 rng(2);
  const auto q = randn(4, 3, rng);
  const auto k = randn(4, 3, rng);
  const auto v = randn(4, 3, rng);
  const auto u = randn(4, 3, rng);
  const AttentionTensors<double> t(q, k, v);
  const auto good = linear_attention_backward(t, u);
  const auto bad = linear_attention_backward(t, u, GradientFault::flip_dv_sign);
  CHECK(max_diff(good.dq, bad.dq) == 0.0);
  CHECK(max_diff(good.dk, bad.dk) == 0.0);
  for (std::size_t i = 0; i < good.dv.size(); ++i) CHECK(bad.dv.flat()[i] == -good.dv.flat()[i]);
  CHECK_THROWS_AS(linear_attention_backward(t, Matrix<double>(3, 3)), std::invalid_argument);
}

TEST_CASE("gradient relative error uses a floor") {
  CHECK(gradient_relative_error(1.0, 1.0) == 0.0);
  CHECK(gradient_relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(gradient_relative_error(0.0, 1e-12) == doctest::Approx(1e-12 / kGradientErrorFloor));
}

TEST_CASE("property suite passes and catches the injected fault") {
  AttentionCheckOptions o;
  o.trials = 3;
  for (const auto& r : run_attention_checks(o)) {
    INFO(r.name << " " << r.max_error);
    CHECK(r.passed());
  }
  o.n = 1;
  o.d = 1;
  for (const auto& r : run_attention_checks(o)) CHECK(r.passed());
  o.n = 16;
  o.d = 4;
  o.fault = GradientFault::flip_dv_sign;
  const auto results = run_attention_checks(o);
  for (const auto& r : results) CHECK(r.passed() == (r.name != "gradient"));
  o.n = 5000;
  CHECK_THROWS_AS(run_attention_checks(o), std::invalid_argument);
}

TEST_CASE("feature maps flatten x-fastest and round trip") {
  FeatureMap m{2, 3, 4, 2, std::vector<double>(2 * 3 * 4 * 2)};
  std::iota(m.values.begin(), m.values.end(), 0.0);
  const auto tokens = flatten_feature_map(m);
  CHECK(tokens.rows() == 24);
  CHECK(tokens.cols() == 2);
  CHECK(tokens(1, 0) == m.at(1, 0, 0, 0));
  CHECK(tokens(4, 1) == m.at(0, 1, 0, 1));
  CHECK(tokens(12, 0) == m.at(0, 0, 1, 0));
  CHECK(unflatten_tokens(tokens, 2, 3, 4) == m);
  CHECK_THROWS(unflatten_tokens(tokens, 2, 3, 5));
}

TEST_CASE("projection shapes") {
  std::mt19937_64 rng(4);
  const auto x = randn(10, 6, rng);
  const auto t = project_tokens(x, randn(6, 3, rng), randn(6, 3, rng), randn(6, 3, rng));
  CHECK(t.tokens() == 10);
  CHECK(t.channels() == 3);
  CHECK_THROWS(project_tokens(x, randn(5, 3, rng), randn(6, 3, rng), randn(6, 3, rng)));
}

TEST_CASE("cost model matches the counted work") {
  std::mt19937_64 rng(8);
  for (std::size_t n : {1, 7, 32}) {
    for (std::size_t d : {1, 4, 9}) {
      const AttentionTensors<double> t(randn(n, d, rng), randn(n, d, rng), randn(n, d, rng));
      CHECK(linear_attention(t).flops == attention_cost(n, d, Variant::linear));
      CHECK(quadratic_attention(t).flops == attention_cost(n, d, Variant::quadratic));
    }
  }
  CHECK(attention_cost(10, 3, Variant::quadratic) == 2 * 100 * 3 + 100);
  CHECK(attention_cost(10, 3, Variant::linear) == 2 * 10 * 9 + 2 * 10 * 3);
  for (std::uint64_t n = 256; n <= (1U << 20); n *= 2) {
    CHECK(attention_cost(2 * n, 16, Variant::linear) == 2 * attention_cost(n, 16, Variant::linear));
    CHECK(attention_cost(2 * n, 16, Variant::quadratic) ==
          4 * attention_cost(n, 16, Variant::quadratic));
  }
  CHECK_THROWS_AS(attention_cost(1ULL << 40, 1ULL << 20, Variant::quadratic), std::overflow_error);
}

TEST_CASE("log-log slope of synthetic timings") {
  std::vector<BenchRow> rows;
  for (std::uint64_t n : {100, 200, 400, 800}) {
    rows.push_back({n, 8, Variant::linear, 1e-6 * static_cast<double>(n), 0});
    rows.push_back({n, 8, Variant::quadratic, 1e-9 * static_cast<double>(n * n), 0});
  }
  CHECK(*loglog_slope(rows, Variant::linear) == doctest::Approx(1.0));
  CHECK(*loglog_slope(rows, Variant::quadratic) == doctest::Approx(2.0));
  CHECK_FALSE(loglog_slope(std::span(rows).first(1), Variant::linear).has_value());
}

TEST_CASE("bench rows carry the cost model and validate input") {
  const std::vector<std::uint64_t> ns{16, 32};
  const auto rows = bench_attention(ns, 4, 3, Variant::linear);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.flops == attention_cost(r.n, r.d, Variant::linear));
    CHECK(r.median_seconds > 0.0);
  }
  std::ostringstream os;
  write_bench_csv(os, rows);
  CHECK(os.str().rfind("n,d,variant,median_seconds,flops\n16,4,linear,", 0) == 0);
  CHECK_THROWS_AS(bench_attention(ns, 4, 2, Variant::linear), std::invalid_argument);
}
