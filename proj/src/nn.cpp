// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/nn.hpp"

#include <cmath>

#include "cap2sum/error.hpp"

namespace cap2sum::nn {

Var ParameterStore::add(const std::string& name, Matrix init) {
  for (const auto& p : params_) {
    if (p.name == name) throw ConfigError("duplicate parameter name: " + name);
  }
  Var v = Var::parameter(std::move(init));
  params_.push_back({name, v});
  return v;
}

const Var& ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.var;
  }
  throw NotFoundError("unknown parameter: " + name);
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

Index ParameterStore::total_size() const {
  Index n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

Var ForwardContext::maybe_dropout(const Var& x) const {
  if (!training || dropout <= 0.0 || rng == nullptr) return x;
  return ag::dropout(x, dropout, *rng);
}

Linear::Linear(ParameterStore& store, const std::string& name, Index in,
               Index out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  weight_ = store.add(name + ".weight", std::move(w));
  bias_ = store.add(name + ".bias", Matrix::Zero(1, out));
}

Var Linear::operator()(const Var& x) const {
  return ag::add_row(ag::matmul(x, weight_), bias_);
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, Index dim) {
  gamma_ = store.add(name + ".gamma", Matrix::Ones(1, dim));
  beta_ = store.add(name + ".beta", Matrix::Zero(1, dim));
}

Var LayerNorm::operator()(const Var& x) const {
  return ag::add_row(ag::mul_row(ag::layer_norm_rows(x), gamma_), beta_);
}

Mlp::Mlp(ParameterStore& store, const std::string& name, Index in,
         Index hidden, Index out, std::mt19937_64& rng)
    : fc1_(store, name + ".fc1", in, hidden, rng),
      fc2_(store, name + ".fc2", hidden, out, rng) {}

Var Mlp::operator()(const Var& x, const ForwardContext& ctx) const {
  return fc2_(ctx.maybe_dropout(ag::gelu(fc1_(x))));
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store,
                                       const std::string& name, Index dim,
                                       int heads, std::mt19937_64& rng)
    : q_(store, name + ".q", dim, dim, rng),
      k_(store, name + ".k", dim, dim, rng),
      v_(store, name + ".v", dim, dim, rng),
      o_(store, name + ".o", dim, dim, rng),
      heads_(heads),
      head_dim_(dim / heads) {
  if (heads < 1 || dim % heads != 0)
    throw ConfigError(name + ": embed_dim must be divisible by num_heads");
}

Var MultiHeadAttention::operator()(const Var& query, const Var& memory,
                                   const std::optional<Var>& bias) const {
  const Var q = q_(query);
  const Var k = k_(memory);
  const Var v = v_(memory);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(heads_));
  for (int h = 0; h < heads_; ++h) {
    const Index off = h * head_dim_;
    Var logits = ag::scale(ag::matmul_nt(ag::slice_cols(q, off, head_dim_),
                                         ag::slice_cols(k, off, head_dim_)),
                           inv_sqrt);
    if (bias) {
      logits = bias->rows() == 1 && logits.rows() != 1
                   ? ag::add_row(logits, *bias)
                   : ag::add(logits, *bias);
    }
    heads.push_back(
        ag::matmul(ag::softmax_rows(logits), ag::slice_cols(v, off, head_dim_)));
  }
  return o_(heads_ == 1 ? heads.front() : ag::concat_cols(heads));
}

TransformerBlock::TransformerBlock(ParameterStore& store,
                                   const std::string& name, Index dim,
                                   int heads, double mlp_ratio,
                                   bool cross_attention, std::mt19937_64& rng)
    : ln_self_(store, name + ".ln_self", dim),
      self_attn_(store, name + ".self_attn", dim, heads, rng),
      has_cross_(cross_attention) {
  if (has_cross_) {
    ln_cross_ = LayerNorm(store, name + ".ln_cross", dim);
    cross_attn_ = MultiHeadAttention(store, name + ".cross_attn", dim, heads, rng);
  }
  ln_mlp_ = LayerNorm(store, name + ".ln_mlp", dim);
  const auto hidden = static_cast<Index>(std::lround(mlp_ratio * static_cast<double>(dim)));
  mlp_ = Mlp(store, name + ".mlp", dim, std::max<Index>(hidden, 1), dim, rng);
}

Var TransformerBlock::operator()(const Var& x, const ForwardContext& ctx,
                                 const std::optional<Var>& self_bias,
                                 const Var* memory,
                                 const std::optional<Var>& cross_bias) const {
  const Var h = ln_self_(x);
  Var out = ag::add(x, ctx.maybe_dropout(self_attn_(h, h, self_bias)));
  if (has_cross_) {
    if (memory == nullptr)
      throw ShapeError("cross-attention block called without memory");
    out = ag::add(out, ctx.maybe_dropout(cross_attn_(ln_cross_(out), *memory,
                                                     cross_bias)));
  }
  return ag::add(out, ctx.maybe_dropout(mlp_(ln_mlp_(out), ctx)));
}

Matrix sinusoidal_encoding(Index positions, Index dim) {
  Matrix pe(positions, dim);
  for (Index p = 0; p < positions; ++p) {
    for (Index i = 0; i < dim; ++i) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(p) * freq;
      pe(p, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Matrix causal_mask(Index length) {
  Matrix m = Matrix::Zero(length, length);
  for (Index r = 0; r < length; ++r) {
    for (Index c = r + 1; c < length; ++c) m(r, c) = -1e9;
  }
  return m;
}

}  // namespace cap2sum::nn
