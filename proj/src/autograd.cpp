// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/autograd.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

#include "cap2sum/error.hpp"

namespace cap2sum::ag {

namespace {

thread_local bool g_grad_enabled = true;

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape(a.value()) +
                     " vs " + shape(b.value()));
}

/// Wraps `value` in a node. The backward closure is kept only when some
/// input participates in differentiation.
Var make(Matrix value, std::vector<Var> inputs,
         std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  if (g_grad_enabled) {
    for (const auto& in : inputs) {
      if (in.requires_grad()) {
        node->requires_grad = true;
        break;
      }
    }
  }
  if (node->requires_grad) {
    node->parents.reserve(inputs.size());
    for (auto& in : inputs) node->parents.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

/// Gradient sink for parent `i`, or nullptr when it needs none.
Matrix* sink(Node& self, std::size_t i) {
  auto& p = self.parents[i];
  return p->requires_grad ? &p->ensure_grad() : nullptr;
}

template <typename F>
Var unary(const Var& a, F&& f, std::function<void(Node&)> backward) {
  return make(a.value().unaryExpr(std::forward<F>(f)), {a}, std::move(backward));
}

}  // namespace

Var Var::constant(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  return Var(std::move(node));
}

Var Var::parameter(Matrix value) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  return Var(std::move(node));
}

Var Var::scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

double Var::item() const {
  if (rows() != 1 || cols() != 1)
    throw ShapeError("item() requires a 1x1 value, got " + shape(value()));
  return value()(0, 0);
}

void Var::backward() const {
  if (rows() != 1 || cols() != 1)
    throw ShapeError("backward() requires a 1x1 root, got " + shape(value()));
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() == n->value.size()) n->backward(*n);
  }
}

void Var::zero_grad() {
  if (node_) node_->grad.resize(0, 0);
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---------------------------------------------------------------------------
// Linear algebra

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + shape(a.value()) + " * " + shape(b.value()));
  return make(a.value() * b.value(), {a, b}, [](Node& self) {
    const auto& A = self.parents[0]->value;
    const auto& B = self.parents[1]->value;
    if (auto* g = sink(self, 0)) g->noalias() += self.grad * B.transpose();
    if (auto* g = sink(self, 1)) g->noalias() += A.transpose() * self.grad;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a.cols() != b.cols())
    throw ShapeError("matmul_nt: " + shape(a.value()) + " * T(" +
                     shape(b.value()) + ")");
  return make(a.value() * b.value().transpose(), {a, b}, [](Node& self) {
    const auto& A = self.parents[0]->value;
    const auto& B = self.parents[1]->value;
    if (auto* g = sink(self, 0)) g->noalias() += self.grad * B;
    if (auto* g = sink(self, 1)) g->noalias() += self.grad.transpose() * A;
  });
}

Var transpose(const Var& a) {
  return make(a.value().transpose(), {a}, [](Node& self) {
    if (auto* g = sink(self, 0)) *g += self.grad.transpose();
  });
}

// ---------------------------------------------------------------------------
// Elementwise

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return make(a.value() + b.value(), {a, b}, [](Node& self) {
    if (auto* g = sink(self, 0)) *g += self.grad;
    if (auto* g = sink(self, 1)) *g += self.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return make(a.value() - b.value(), {a, b}, [](Node& self) {
    if (auto* g = sink(self, 0)) *g += self.grad;
    if (auto* g = sink(self, 1)) *g -= self.grad;
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    const auto& A = self.parents[0]->value;
    const auto& B = self.parents[1]->value;
    if (auto* g = sink(self, 0)) *g += self.grad.cwiseProduct(B);
    if (auto* g = sink(self, 1)) *g += self.grad.cwiseProduct(A);
  });
}

Var div(const Var& a, const Var& b) {
  require_same_shape(a, b, "div");
  return make(a.value().cwiseQuotient(b.value()), {a, b}, [](Node& self) {
    const auto& A = self.parents[0]->value;
    const auto& B = self.parents[1]->value;
    if (auto* g = sink(self, 0)) *g += self.grad.cwiseQuotient(B);
    if (auto* g = sink(self, 1))
      *g -= self.grad.cwiseProduct(A).cwiseQuotient(B.cwiseProduct(B));
  });
}

Var minimum(const Var& a, const Var& b) {
  require_same_shape(a, b, "minimum");
  return make(a.value().cwiseMin(b.value()), {a, b}, [](Node& self) {
    const auto& A = self.parents[0]->value;
    const auto& B = self.parents[1]->value;
    const Matrix pick_a = (A.array() <= B.array()).cast<double>().matrix();
    if (auto* g = sink(self, 0)) *g += self.grad.cwiseProduct(pick_a);
    if (auto* g = sink(self, 1))
      *g += self.grad.cwiseProduct((1.0 - pick_a.array()).matrix());
  });
}

Var maximum(const Var& a, const Var& b) {
  require_same_shape(a, b, "maximum");
  return make(a.value().cwiseMax(b.value()), {a, b}, [](Node& self) {
    const auto& A = self.parents[0]->value;
    const auto& B = self.parents[1]->value;
    const Matrix pick_a = (A.array() >= B.array()).cast<double>().matrix();
    if (auto* g = sink(self, 0)) *g += self.grad.cwiseProduct(pick_a);
    if (auto* g = sink(self, 1))
      *g += self.grad.cwiseProduct((1.0 - pick_a.array()).matrix());
  });
}

// ---------------------------------------------------------------------------
// Broadcasting

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("add_row: " + shape(a.value()) + " + row " +
                     shape(row.value()));
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return make(std::move(out), {a, row}, [](Node& self) {
    if (auto* g = sink(self, 0)) *g += self.grad;
    if (auto* g = sink(self, 1)) *g += self.grad.colwise().sum();
  });
}

Var mul_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw ShapeError("mul_row: " + shape(a.value()) + " * row " +
                     shape(row.value()));
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return make(std::move(out), {a, row}, [](Node& self) {
    const auto& A = self.parents[0]->value;
    const auto& R = self.parents[1]->value;
    if (auto* g = sink(self, 0))
      g->array() += self.grad.array().rowwise() * R.row(0).array();
    if (auto* g = sink(self, 1)) *g += self.grad.cwiseProduct(A).colwise().sum();
  });
}

Var scale_rows(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows())
    throw ShapeError("scale_rows: " + shape(a.value()) + " by column " +
                     shape(col.value()));
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  return make(std::move(out), {a, col}, [](Node& self) {
    const auto& A = self.parents[0]->value;
    const auto& C = self.parents[1]->value;
    if (auto* g = sink(self, 0))
      g->array() += self.grad.array().colwise() * C.col(0).array();
    if (auto* g = sink(self, 1)) *g += self.grad.cwiseProduct(A).rowwise().sum();
  });
}

Var expand(const Var& a, Index rows, Index cols) {
  const bool row_ok = a.rows() == 1 || a.rows() == rows;
  const bool col_ok = a.cols() == 1 || a.cols() == cols;
  if (!row_ok || !col_ok)
    throw ShapeError("expand: cannot broadcast " + shape(a.value()) + " to " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  Matrix out = a.value().replicate(rows / a.rows(), cols / a.cols());
  return make(std::move(out), {a}, [](Node& self) {
    auto* g = sink(self, 0);
    if (!g) return;
    const bool rows_b = g->rows() == 1 && self.grad.rows() != 1;
    const bool cols_b = g->cols() == 1 && self.grad.cols() != 1;
    if (rows_b && cols_b) {
      (*g)(0, 0) += self.grad.sum();
    } else if (rows_b) {
      *g += self.grad.colwise().sum();
    } else if (cols_b) {
      *g += self.grad.rowwise().sum();
    } else {
      *g += self.grad;
    }
  });
}

// ---------------------------------------------------------------------------
// Scalars

Var scale(const Var& a, double s) {
  return make(a.value() * s, {a}, [s](Node& self) {
    if (auto* g = sink(self, 0)) *g += self.grad * s;
  });
}

Var add_scalar(const Var& a, double s) {
  return make((a.value().array() + s).matrix(), {a}, [](Node& self) {
    if (auto* g = sink(self, 0)) *g += self.grad;
  });
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities

Var sigmoid(const Var& a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](Node& self) {
                 const auto& y = self.value.array();
                 if (auto* g = sink(self, 0))
                   g->array() += self.grad.array() * y * (1.0 - y);
               });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](Node& self) {
    const auto& y = self.value.array();
    if (auto* g = sink(self, 0)) g->array() += self.grad.array() * (1.0 - y * y);
  });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](Node& self) {
    const auto& x = self.parents[0]->value.array();
    if (auto* g = sink(self, 0))
      g->array() += self.grad.array() * (x > 0.0).cast<double>();
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(const Var& a) {
  return unary(
      a,
      [](double x) {
        return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
      },
      [](Node& self) {
        auto* g = sink(self, 0);
        if (!g) return;
        const Matrix& x = self.parents[0]->value;
        const Matrix d = x.unaryExpr([](double v) {
          const double th = std::tanh(kGeluC * (v + kGeluA * v * v * v));
          return 0.5 * (1.0 + th) +
                 0.5 * v * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
        });
        *g += self.grad.cwiseProduct(d);
      });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](Node& self) {
    if (auto* g = sink(self, 0)) *g += self.grad.cwiseProduct(self.value);
  });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](Node& self) {
    if (auto* g = sink(self, 0))
      *g += self.grad.cwiseQuotient(self.parents[0]->value);
  });
}

Var softplus(const Var& a) {
  return unary(
      a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](Node& self) {
        auto* g = sink(self, 0);
        if (!g) return;
        const Matrix s = self.parents[0]->value.unaryExpr(
            [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
        *g += self.grad.cwiseProduct(s);
      });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](Node& self) {
    if (auto* g = sink(self, 0))
      *g += 2.0 * self.grad.cwiseProduct(self.parents[0]->value);
  });
}

Var pow(const Var& a, double p) {
  return unary(a, [p](double x) { return std::pow(x, p); }, [p](Node& self) {
    auto* g = sink(self, 0);
    if (!g) return;
    const Matrix d = self.parents[0]->value.unaryExpr(
        [p](double x) { return p * std::pow(x, p - 1.0); });
    *g += self.grad.cwiseProduct(d);
  });
}

// ---------------------------------------------------------------------------
// Row-wise normalizations

Var softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  return make(std::move(y), {a}, [](Node& self) {
    auto* g = sink(self, 0);
    if (!g) return;
    const Matrix& y = self.value;
    const Eigen::VectorXd dot = self.grad.cwiseProduct(y).rowwise().sum();
    *g += (y.array() * (self.grad.colwise() - dot).array()).matrix();
  });
}

Var log_softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    const double lse = m + std::log((y.row(r).array() - m).exp().sum());
    y.row(r).array() -= lse;
  }
  return make(std::move(y), {a}, [](Node& self) {
    auto* g = sink(self, 0);
    if (!g) return;
    const Matrix p = self.value.array().exp().matrix();
    const Eigen::VectorXd gsum = self.grad.rowwise().sum();
    *g += self.grad - (p.array().colwise() * gsum.array()).matrix();
  });
}

Var layer_norm_rows(const Var& a, double eps) {
  const Matrix& x = a.value();
  const Index n = x.cols();
  Matrix y(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    y.row(r) = ((x.row(r).array() - mu) * inv_std[r]).matrix();
  }
  return make(std::move(y), {a}, [inv_std](Node& self) {
    auto* g = sink(self, 0);
    if (!g) return;
    const Matrix& xhat = self.value;
    const Matrix& G = self.grad;
    for (Index r = 0; r < G.rows(); ++r) {
      const double mg = G.row(r).mean();
      const double mgx = G.row(r).dot(xhat.row(r)) / static_cast<double>(G.cols());
      g->row(r) += (inv_std[r] *
                    (G.row(r).array() - mg - xhat.row(r).array() * mgx))
                       .matrix();
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make(std::move(out), {a}, [](Node& self) {
    if (auto* g = sink(self, 0)) g->array() += self.grad(0, 0);
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return make(std::move(out), {a}, [n](Node& self) {
    if (auto* g = sink(self, 0)) g->array() += self.grad(0, 0) / n;
  });
}

Var col_mean(const Var& a) {
  const double n = static_cast<double>(a.rows());
  return make(a.value().colwise().mean(), {a}, [n](Node& self) {
    if (auto* g = sink(self, 0)) g->rowwise() += self.grad.row(0) / n;
  });
}

Var row_sum(const Var& a) {
  return make(a.value().rowwise().sum(), {a}, [](Node& self) {
    if (auto* g = sink(self, 0)) g->colwise() += self.grad.col(0);
  });
}

// ---------------------------------------------------------------------------
// Indexing

Var slice_rows(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw ShapeError("slice_rows out of range");
  return make(a.value().middleRows(start, count), {a},
              [start, count](Node& self) {
                if (auto* g = sink(self, 0)) g->middleRows(start, count) += self.grad;
              });
}

Var slice_cols(const Var& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw ShapeError("slice_cols out of range");
  return make(a.value().middleCols(start, count), {a},
              [start, count](Node& self) {
                if (auto* g = sink(self, 0)) g->middleCols(start, count) += self.grad;
              });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != parts[0].cols()) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, parts[0].cols());
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return make(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
              [](Node& self) {
                Index r = 0;
                for (std::size_t i = 0; i < self.parents.size(); ++i) {
                  const Index n = self.parents[i]->value.rows();
                  if (auto* g = sink(self, i)) *g += self.grad.middleRows(r, n);
                  r += n;
                }
              });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != parts[0].rows()) throw ShapeError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(parts[0].rows(), cols);
  Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return make(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
              [](Node& self) {
                Index c = 0;
                for (std::size_t i = 0; i < self.parents.size(); ++i) {
                  const Index n = self.parents[i]->value.cols();
                  if (auto* g = sink(self, i)) *g += self.grad.middleCols(c, n);
                  c += n;
                }
              });
}

Var gather_rows(const Var& a, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return make(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    auto* g = sink(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < idx.size(); ++i)
      g->row(idx[i]) += self.grad.row(static_cast<Index>(i));
  });
}

Var pick(const Var& a, std::span<const std::pair<Index, Index>> cells) {
  Matrix out(static_cast<Index>(cells.size()), 1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto [r, c] = cells[i];
    if (r < 0 || r >= a.rows() || c < 0 || c >= a.cols())
      throw ShapeError("pick: index out of range");
    out(static_cast<Index>(i), 0) = a.value()(r, c);
  }
  std::vector<std::pair<Index, Index>> idx(cells.begin(), cells.end());
  return make(std::move(out), {a}, [idx = std::move(idx)](Node& self) {
    auto* g = sink(self, 0);
    if (!g) return;
    for (std::size_t i = 0; i < idx.size(); ++i)
      (*g)(idx[i].first, idx[i].second) += self.grad(static_cast<Index>(i), 0);
  });
}

Var dropout(const Var& a, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return a;
  std::bernoulli_distribution keep(1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = keep(rng) ? 1.0 / (1.0 - p) : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return make(std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    if (auto* g = sink(self, 0)) *g += self.grad.cwiseProduct(mask);
  });
}

Var detach(const Var& a) { return Var::constant(a.value()); }

}  // namespace cap2sum::ag
