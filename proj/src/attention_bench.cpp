#include "voleval/attention_bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>
#include <string>

namespace voleval::attn {

namespace {

Matrix<float> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.0F, 1.0F);
  Matrix<float> m(rows, cols);
  for (float& x : m.flat()) {
    x = dist(rng);
  }
  return m;
}

}  // namespace

std::vector<BenchRow> bench_attention(std::span<const std::uint64_t> n_list, std::uint64_t d,
                                      int repeats, Variant variant, std::uint64_t seed) {
  if (repeats < 3) {
    throw std::invalid_argument("bench_attention needs at least 3 repeats");
  }
  std::mt19937_64 rng(seed);
  std::vector<BenchRow> rows;
  for (std::uint64_t n : n_list) {
    if (n == 0 || d == 0) {
      throw std::invalid_argument("bench sizes must be positive");
    }
    constexpr auto kMaxElems = std::numeric_limits<std::size_t>::max() / sizeof(float);
    if (n > kMaxElems / d) {
      throw std::length_error("n·d = " + std::to_string(n) + "·" + std::to_string(d) +
                              " exceeds addressable memory");
    }
    std::vector<double> seconds;
    std::uint64_t flops = 0;
    for (int r = 0; r < repeats; ++r) {
      AttentionTensors<float> t(random_matrix(n, d, rng), random_matrix(n, d, rng),
                                random_matrix(n, d, rng));
      const auto start = std::chrono::steady_clock::now();
      const auto out = variant == Variant::quadratic ? quadratic_attention(t) : linear_attention(t);
      const auto stop = std::chrono::steady_clock::now();
      seconds.push_back(std::chrono::duration<double>(stop - start).count());
      flops = out.flops;
    }
    std::sort(seconds.begin(), seconds.end());
    const std::size_t mid = seconds.size() / 2;
    const double median =
        seconds.size() % 2 ? seconds[mid] : 0.5 * (seconds[mid - 1] + seconds[mid]);
    rows.push_back({n, d, variant, median, flops});
  }
  return rows;
}

std::optional<double> loglog_slope(std::span<const BenchRow> rows, Variant variant) {
  std::vector<double> xs;
  std::vector<double> ys;
  std::set<std::uint64_t> distinct;
  for (const auto& r : rows) {
    if (r.variant != variant || r.median_seconds <= 0.0) {
      continue;
    }
    xs.push_back(std::log(static_cast<double>(r.n)));
    ys.push_back(std::log(r.median_seconds));
    distinct.insert(r.n);
  }
  if (distinct.size() < 2) {
    return std::nullopt;
  }
  const double k = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows) {
  os << "n,d,variant,median_seconds,flops\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.6g", r.median_seconds);
    os << r.n << ',' << r.d << ',' << variant_name(r.variant) << ',' << buf << ',' << r.flops
       << '\n';
  }
}

}  // namespace voleval::attn
