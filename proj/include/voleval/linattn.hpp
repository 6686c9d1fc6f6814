#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "voleval/matrix.hpp"

namespace voleval::attn {

/// Queries, keys and values for one single-head attention call, each n tokens × d channels.
template <typename T>
class AttentionTensors {
 public:
  /// Throws std::invalid_argument unless all three share one non-empty shape with finite entries.
  AttentionTensors(Matrix<T> q, Matrix<T> k, Matrix<T> v);

  const Matrix<T>& q() const { return q_; }
  const Matrix<T>& k() const { return k_; }
  const Matrix<T>& v() const { return v_; }
  std::size_t tokens() const { return q_.rows(); }
  std::size_t channels() const { return q_.cols(); }

 private:
  Matrix<T> q_;
  Matrix<T> k_;
  Matrix<T> v_;
};

template <typename T>
struct AttentionOutput {
  Matrix<T> out;
  /// Multiply-accumulates plus exponentials actually executed; see attention_cost().
  std::uint64_t flops = 0;
};

struct AttentionGradients {
  Matrix<double> dq;
  Matrix<double> dk;
  Matrix<double> dv;
};

enum class Variant { quadratic, linear };

std::string_view variant_name(Variant v);

/// Softmax along each row, max-subtracted.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& m);

/// Softmax down each column, max-subtracted.
template <typename T>
Matrix<T> softmax_cols(const Matrix<T>& m);

/// Dot-product attention: out_i = Σ_j softmax_j(q_i·k_j / √d) v_j.
/// Streams one score row at a time, so memory stays O(n) while work is O(n²d).
template <typename T>
AttentionOutput<T> quadratic_attention(const AttentionTensors<T>& t);

/// Factored linear attention: softmax_rows(Q) · (softmax_cols(K)ᵀ · V).
///
/// The d×d context matrix is formed first, which makes the cost O(n·d²).
/// There is no 1/√d temperature here; the two kernels are different operators.
template <typename T>
AttentionOutput<T> linear_attention(const AttentionTensors<T>& t);

/// The n×n matrix softmax_rows(Q)·softmax_cols(K)ᵀ that linear_attention applies implicitly.
/// Verification only: it is quadratic in n.
Matrix<double> implied_weights(const AttentionTensors<double>& t);

/// Test hook for the gradient checker's negative control.
enum class GradientFault { none, flip_dv_sign };

/// Gradients of Σ upstream ⊙ linear_attention(t).out with respect to Q, K and V.
AttentionGradients linear_attention_backward(const AttentionTensors<double>& t,
                                             const Matrix<double>& upstream,
                                             GradientFault fault = GradientFault::none);

/// Volumetric feature map, depth × height × width × channels, with channels innermost and
/// voxels x-fastest: value(x, y, z, c) = values[((z·height + y)·width + x)·channels + c].
struct FeatureMap {
  std::size_t depth = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  double& at(std::size_t x, std::size_t y, std::size_t z, std::size_t c) {
    return values[((z * height + y) * width + x) * channels + c];
  }
  double at(std::size_t x, std::size_t y, std::size_t z, std::size_t c) const {
    return values[((z * height + y) * width + x) * channels + c];
  }
  bool operator==(const FeatureMap&) const = default;
};

/// Token matrix (D·H·W) × C; token x + W·(y + H·z) is voxel (x, y, z).
Matrix<double> flatten_feature_map(const FeatureMap& map);

/// Inverse of flatten_feature_map.
FeatureMap unflatten_tokens(const Matrix<double>& tokens, std::size_t depth, std::size_t height,
                            std::size_t width);

/// Q = X·Wq, K = X·Wk, V = X·Wv for caller-supplied projection weights (C × d each).
AttentionTensors<double> project_tokens(const Matrix<double>& x, const Matrix<double>& wq,
                                        const Matrix<double>& wk, const Matrix<double>& wv);

/// Closed-form operation count the kernels report:
///   quadratic: 2·n²·d + n²    (scores, aggregation, one exp per score)
///   linear:    2·n·d² + 2·n·d (context, read-out, one exp per Q and K entry)
/// Throws std::overflow_error if the count does not fit in 64 bits.
std::uint64_t attention_cost(std::uint64_t n, std::uint64_t d, Variant variant);

}  // namespace voleval::attn
