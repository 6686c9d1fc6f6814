#include "voleval/attention_checks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace voleval::attn {

namespace {

Matrix<double> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix<double> m(rows, cols);
  for (double& x : m.flat()) {
    x = dist(rng);
  }
  return m;
}

double max_abs_diff(const Matrix<double>& a, const Matrix<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.flat()[i] - b.flat()[i]));
  }
  return worst;
}

Matrix<double> permute_rows(const Matrix<double>& m, const std::vector<std::size_t>& perm) {
  Matrix<double> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy_n(m.row(perm[i]).begin(), m.cols(), out.row(i).begin());
  }
  return out;
}

// Amount by which any output entry leaves [min_j V_jc, max_j V_jc].
double hull_excess(const Matrix<double>& out, const Matrix<double>& v) {
  double worst = 0.0;
  for (std::size_t c = 0; c < v.cols(); ++c) {
    double lo = v(0, c);
    double hi = v(0, c);
    for (std::size_t j = 1; j < v.rows(); ++j) {
      lo = std::min(lo, v(j, c));
      hi = std::max(hi, v(j, c));
    }
    for (std::size_t i = 0; i < out.rows(); ++i) {
      worst = std::max({worst, out(i, c) - hi, lo - out(i, c)});
    }
  }
  return worst;
}

double weighted_sum(const Matrix<double>& out, const Matrix<double>& upstream) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    s += out.flat()[i] * upstream.flat()[i];
  }
  return s;
}

}  // namespace

double gradient_relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradientErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

Matrix<double> numeric_gradient(Matrix<double>& m, const std::function<double()>& loss,
                                double step) {
  Matrix<double> grad(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) {
    double& x = m.flat()[i];
    const double saved = x;
    x = saved + step;
    const double up = loss();
    x = saved - step;
    const double down = loss();
    x = saved;
    grad.flat()[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

std::vector<CheckResult> run_attention_checks(const AttentionCheckOptions& o) {
  if (o.n < 1 || o.d < 1 || o.trials < 1) {
    throw std::invalid_argument("attention checks need n, d, trials >= 1");
  }
  if (o.n > 4096) {
    throw std::invalid_argument("attention checks form n×n weights; n must be <= 4096");
  }
  std::mt19937_64 rng(o.seed);
  CheckResult stochastic{"row_stochastic", 0.0, 1e-9};
  CheckResult factored{"factored_vs_unfactored", 0.0, 1e-12};
  CheckResult permutation{"permutation_equivariance", 0.0, 1e-12};
  CheckResult hull{"convex_hull", 0.0, 1e-12};
  CheckResult gradient{"gradient", 0.0, 1e-5};

  for (int trial = 0; trial < o.trials; ++trial) {
    const AttentionTensors<double> t(random_matrix(o.n, o.d, rng), random_matrix(o.n, o.d, rng),
                                     random_matrix(o.n, o.d, rng));
    const Matrix<double> weights = implied_weights(t);
    for (std::size_t i = 0; i < o.n; ++i) {
      const auto row = weights.row(i);
      const double sum = std::accumulate(row.begin(), row.end(), 0.0);
      stochastic.max_error = std::max(stochastic.max_error, std::abs(sum - 1.0));
    }

    const auto lin = linear_attention(t);
    const auto quad = quadratic_attention(t);
    factored.max_error = std::max(factored.max_error, max_abs_diff(lin.out, matmul(weights, t.v())));
    hull.max_error = std::max({hull.max_error, hull_excess(lin.out, t.v()), hull_excess(quad.out, t.v())});

    std::vector<std::size_t> perm(o.n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const AttentionTensors<double> shuffled(permute_rows(t.q(), perm), permute_rows(t.k(), perm),
                                            permute_rows(t.v(), perm));
    permutation.max_error =
        std::max({permutation.max_error,
                  max_abs_diff(linear_attention(shuffled).out, permute_rows(lin.out, perm)),
                  max_abs_diff(quadratic_attention(shuffled).out, permute_rows(quad.out, perm))});

    const std::size_t gn = std::min(o.n, o.gradient_max_n);
    const std::size_t gd = std::min(o.d, o.gradient_max_d);
    Matrix<double> q = random_matrix(gn, gd, rng);
    Matrix<double> k = random_matrix(gn, gd, rng);
    Matrix<double> v = random_matrix(gn, gd, rng);
    const Matrix<double> upstream = random_matrix(gn, gd, rng);
    const AttentionGradients analytic =
        linear_attention_backward(AttentionTensors<double>(q, k, v), upstream, o.fault);
    auto loss = [&] {
      return weighted_sum(linear_attention(AttentionTensors<double>(q, k, v)).out, upstream);
    };
    constexpr double kStep = 1e-5;
    const Matrix<double> nq = numeric_gradient(q, loss, kStep);
    const Matrix<double> nk = numeric_gradient(k, loss, kStep);
    const Matrix<double> nv = numeric_gradient(v, loss, kStep);
    for (std::size_t i = 0; i < nq.size(); ++i) {
      gradient.max_error = std::max({gradient.max_error,
                                     gradient_relative_error(analytic.dq.flat()[i], nq.flat()[i]),
                                     gradient_relative_error(analytic.dk.flat()[i], nk.flat()[i]),
                                     gradient_relative_error(analytic.dv.flat()[i], nv.flat()[i])});
    }
  }
  return {stochastic, factored, permutation, hull, gradient};
}

}  // namespace voleval::attn
