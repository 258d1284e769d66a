// SPDX-License-Identifier: Apache-2.0
/**
 * @file autograd.hpp
 * @brief Reverse-mode automatic differentiation over dense 2-D matrices.
 *
 * A Var is a shared handle to a graph node holding a row-major double
 * matrix. Operations record their inputs and a backward closure only when
 * at least one input requires a gradient and grad mode is enabled, so
 * inference under NoGradGuard builds no graph at all.
 *
 * Shapes are strict: broadcasting happens only through the explicitly named
 * helpers (add_row, mul_row, scale_rows, expand).
 */
#pragma once

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "cap2sum/types.hpp"

namespace cap2sum::ag {

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Matrix& ensure_grad() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols())
      grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Matrix value);
  static Var parameter(Matrix value);
  static Var scalar(double value);

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  /// Mutable access for optimizers; never call while a graph is alive.
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  Matrix& mutable_grad() { return node_->ensure_grad(); }
  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;

  /// Back-propagates from this 1×1 node, accumulating into every reachable
  /// node that requires a gradient.
  void backward() const;
  void zero_grad();

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Linear algebra.
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a · bᵀ
Var transpose(const Var& a);

// Elementwise, identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var minimum(const Var& a, const Var& b);
Var maximum(const Var& a, const Var& b);

// Broadcasting.
Var add_row(const Var& a, const Var& row);     // row: 1×cols
Var mul_row(const Var& a, const Var& row);     // row: 1×cols
Var scale_rows(const Var& a, const Var& col);  // col: rows×1
Var expand(const Var& a, Index rows, Index cols);

// Scalars.
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);

// Pointwise nonlinearities.
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);
Var gelu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var softplus(const Var& a);
Var square(const Var& a);
Var pow(const Var& a, double p);  // a > 0 where p is non-integral

// Row-wise normalizations.
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, double eps = 1e-5);

// Reductions.
Var sum(const Var& a);       // → 1×1
Var mean(const Var& a);      // → 1×1
Var col_mean(const Var& a);  // rows×cols → 1×cols
Var row_sum(const Var& a);   // rows×cols → rows×1

// Indexing.
Var slice_rows(const Var& a, Index start, Index count);
Var slice_cols(const Var& a, Index start, Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(const Var& a, std::span<const Index> rows);
Var pick(const Var& a, std::span<const std::pair<Index, Index>> cells);  // → n×1

Var dropout(const Var& a, double p, std::mt19937_64& rng);
Var detach(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator+(const Var& a, double s) { return add_scalar(a, s); }
inline Var operator-(double s, const Var& a) { return add_scalar(scale(a, -1.0), s); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

}  // namespace cap2sum::ag
