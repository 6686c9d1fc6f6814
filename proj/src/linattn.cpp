#include "voleval/linattn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace voleval::attn {

template <typename T>
AttentionTensors<T>::AttentionTensors(Matrix<T> q, Matrix<T> k, Matrix<T> v)
    : q_(std::move(q)), k_(std::move(k)), v_(std::move(v)) {
  if (q_.rows() == 0 || q_.cols() == 0) {
    throw std::invalid_argument("attention needs at least one token and one channel");
  }
  if (!q_.same_shape(k_) || !q_.same_shape(v_)) {
    throw std::invalid_argument("Q, K and V must share one shape");
  }
  for (const Matrix<T>* m : {&q_, &k_, &v_}) {
    for (T x : m->flat()) {
      if (!std::isfinite(x)) {
        throw std::invalid_argument("attention inputs must be finite");
      }
    }
  }
}

std::string_view variant_name(Variant v) {
  return v == Variant::quadratic ? "quadratic" : "linear";
}

namespace {

// Stabilised softmax of a strided vector in place; returns the number of exponentials.
template <typename T>
std::uint64_t softmax_inplace(T* first, std::size_t count, std::size_t stride) {
  T peak = first[0];
  for (std::size_t i = 1; i < count; ++i) {
    peak = std::max(peak, first[i * stride]);
  }
  T total{};
  for (std::size_t i = 0; i < count; ++i) {
    T& x = first[i * stride];
    x = std::exp(x - peak);
    total += x;
  }
  for (std::size_t i = 0; i < count; ++i) {
    first[i * stride] /= total;
  }
  return count;
}

template <typename T>
std::uint64_t softmax_rows_counted(Matrix<T>& m) {
  std::uint64_t ops = 0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    ops += softmax_inplace(m.row(r).data(), m.cols(), 1);
  }
  return ops;
}

template <typename T>
std::uint64_t softmax_cols_counted(Matrix<T>& m) {
  std::uint64_t ops = 0;
  for (std::size_t c = 0; c < m.cols(); ++c) {
    ops += softmax_inplace(m.flat().data() + c, m.rows(), m.cols());
  }
  return ops;
}

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a) {
    throw std::overflow_error("attention cost overflows 64 bits");
  }
  return a * b;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  if (b > std::numeric_limits<std::uint64_t>::max() - a) {
    throw std::overflow_error("attention cost overflows 64 bits");
  }
  return a + b;
}

}  // namespace

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& m) {
  Matrix<T> out = m;
  softmax_rows_counted(out);
  return out;
}

template <typename T>
Matrix<T> softmax_cols(const Matrix<T>& m) {
  Matrix<T> out = m;
  softmax_cols_counted(out);
  return out;
}

template <typename T>
AttentionOutput<T> quadratic_attention(const AttentionTensors<T>& t) {
  const std::size_t n = t.tokens();
  const std::size_t d = t.channels();
  const T scale = T{1} / std::sqrt(static_cast<T>(d));
  AttentionOutput<T> result{Matrix<T>(n, d), 0};
  std::vector<T> scores(n);

  for (std::size_t i = 0; i < n; ++i) {
    auto qi = t.q().row(i);
    for (std::size_t j = 0; j < n; ++j) {
      auto kj = t.k().row(j);
      T acc{};
      for (std::size_t c = 0; c < d; ++c) {
        acc += qi[c] * kj[c];
      }
      scores[j] = acc * scale;
    }
    result.flops += static_cast<std::uint64_t>(n) * d;
    result.flops += softmax_inplace(scores.data(), n, 1);

    auto oi = result.out.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const T w = scores[j];
      auto vj = t.v().row(j);
      for (std::size_t c = 0; c < d; ++c) {
        oi[c] += w * vj[c];
      }
    }
    result.flops += static_cast<std::uint64_t>(n) * d;
  }
  return result;
}

template <typename T>
AttentionOutput<T> linear_attention(const AttentionTensors<T>& t) {
  const std::size_t n = t.tokens();
  const std::size_t d = t.channels();
  AttentionOutput<T> result{Matrix<T>(n, d), 0};

  Matrix<T> phi_q = t.q();
  Matrix<T> rho_k = t.k();
  result.flops += softmax_rows_counted(phi_q);
  result.flops += softmax_cols_counted(rho_k);

  // context = ρ(K)ᵀ V, d × d
  Matrix<T> context(d, d);
  for (std::size_t j = 0; j < n; ++j) {
    auto kj = rho_k.row(j);
    auto vj = t.v().row(j);
    for (std::size_t a = 0; a < d; ++a) {
      const T ka = kj[a];
      auto ca = context.row(a);
      for (std::size_t b = 0; b < d; ++b) {
        ca[b] += ka * vj[b];
      }
    }
    result.flops += static_cast<std::uint64_t>(d) * d;
  }

  for (std::size_t i = 0; i < n; ++i) {
    auto qi = phi_q.row(i);
    auto oi = result.out.row(i);
    for (std::size_t a = 0; a < d; ++a) {
      const T qa = qi[a];
      auto ca = context.row(a);
      for (std::size_t b = 0; b < d; ++b) {
        oi[b] += qa * ca[b];
      }
    }
    result.flops += static_cast<std::uint64_t>(d) * d;
  }
  return result;
}

Matrix<double> implied_weights(const AttentionTensors<double>& t) {
  return matmul_nt(softmax_rows(t.q()), softmax_cols(t.k()));
}

AttentionGradients linear_attention_backward(const AttentionTensors<double>& t,
                                             const Matrix<double>& upstream,
                                             GradientFault fault) {
  if (!upstream.same_shape(t.q())) {
    throw std::invalid_argument("upstream gradient must have the output's shape");
  }
  for (double x : upstream.flat()) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("upstream gradient must be finite");
    }
  }
  const std::size_t n = t.tokens();
  const std::size_t d = t.channels();

  const Matrix<double> phi = softmax_rows(t.q());
  const Matrix<double> rho = softmax_cols(t.k());
  const Matrix<double> context = matmul_tn(rho, t.v());  // d × d

  // out = φ·C, C = ρᵀ·V
  const Matrix<double> d_phi = matmul_nt(upstream, context);  // U·Cᵀ
  const Matrix<double> d_context = matmul_tn(phi, upstream);  // φᵀ·U
  const Matrix<double> d_rho = matmul_nt(t.v(), d_context);   // V·dCᵀ
  Matrix<double> dv = matmul(rho, d_context);                 // ρ·dC

  // Row softmax: dq_ic = φ_ic (dφ_ic − Σ_c' φ_ic' dφ_ic')
  Matrix<double> dq(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double dot = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      dot += phi(i, c) * d_phi(i, c);
    }
    for (std::size_t c = 0; c < d; ++c) {
      dq(i, c) = phi(i, c) * (d_phi(i, c) - dot);
    }
  }

  // Column softmax: dk_jc = ρ_jc (dρ_jc − Σ_j' ρ_j'c dρ_j'c)
  std::vector<double> col_dot(d, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      col_dot[c] += rho(j, c) * d_rho(j, c);
    }
  }
  Matrix<double> dk(n, d);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      dk(j, c) = rho(j, c) * (d_rho(j, c) - col_dot[c]);
    }
  }

  if (fault == GradientFault::flip_dv_sign) {
    for (double& x : dv.flat()) {
      x = -x;
    }
  }
  return {std::move(dq), std::move(dk), std::move(dv)};
}

Matrix<double> flatten_feature_map(const FeatureMap& map) {
  const std::size_t tokens = map.depth * map.height * map.width;
  if (tokens == 0 || map.channels == 0) {
    throw std::invalid_argument("feature map extents must be positive");
  }
  if (map.values.size() != tokens * map.channels) {
    throw std::invalid_argument("feature map value count does not match its extents");
  }
  // Channels are innermost, so the token matrix shares the map's memory order.
  return Matrix<double>(tokens, map.channels, map.values);
}

FeatureMap unflatten_tokens(const Matrix<double>& tokens, std::size_t depth, std::size_t height,
                            std::size_t width) {
  if (tokens.rows() != depth * height * width) {
    throw std::invalid_argument("token count does not match depth·height·width");
  }
  const auto flat = tokens.flat();
  return FeatureMap{depth, height, width, tokens.cols(), {flat.begin(), flat.end()}};
}

AttentionTensors<double> project_tokens(const Matrix<double>& x, const Matrix<double>& wq,
                                        const Matrix<double>& wk, const Matrix<double>& wv) {
  return AttentionTensors<double>(matmul(x, wq), matmul(x, wk), matmul(x, wv));
}

std::uint64_t attention_cost(std::uint64_t n, std::uint64_t d, Variant variant) {
  if (n == 0 || d == 0) {
    throw std::invalid_argument("attention_cost needs n >= 1 and d >= 1");
  }
  if (variant == Variant::quadratic) {
    const std::uint64_t nn = checked_mul(n, n);
    return checked_add(checked_mul(checked_mul(2, nn), d), nn);
  }
  const std::uint64_t nd = checked_mul(n, d);
  return checked_add(checked_mul(checked_mul(2, nd), d), checked_mul(2, nd));
}

template class AttentionTensors<double>;
template class AttentionTensors<float>;
template Matrix<double> softmax_rows(const Matrix<double>&);
template Matrix<float> softmax_rows(const Matrix<float>&);
template Matrix<double> softmax_cols(const Matrix<double>&);
template Matrix<float> softmax_cols(const Matrix<float>&);
template AttentionOutput<double> quadratic_attention(const AttentionTensors<double>&);
template AttentionOutput<float> quadratic_attention(const AttentionTensors<float>&);
template AttentionOutput<double> linear_attention(const AttentionTensors<double>&);
template AttentionOutput<float> linear_attention(const AttentionTensors<float>&);

}  // namespace voleval::attn
