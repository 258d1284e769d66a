// SPDX-License-Identifier: Apache-2.0
/**
 * @file nn.hpp
 * @brief Transformer building blocks shared by the summarizer and captioner.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cap2sum/autograd.hpp"

namespace cap2sum::nn {

using ag::Var;

struct NamedParameter {
  std::string name;
  Var var;
};

/// Ordered registry of trainable parameters. Order is registration order
/// and defines the checkpoint layout.
class ParameterStore {
 public:
  Var add(const std::string& name, Matrix init);
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::vector<NamedParameter>& parameters() { return params_; }
  const Var& find(const std::string& name) const;
  void zero_grad();
  Index total_size() const;

 private:
  std::vector<NamedParameter> params_;
};

/// Training mode flag plus the dropout random stream.
struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  Var maybe_dropout(const Var& x) const;
};

/// Xavier-uniform initialised weight plus zero bias: y = x·W + b.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Index in, Index out,
         std::mt19937_64& rng);
  Var operator()(const Var& x) const;
  Index in_features() const { return weight_.rows(); }
  Index out_features() const { return weight_.cols(); }

 private:
  Var weight_;
  Var bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, Index dim);
  Var operator()(const Var& x) const;

 private:
  Var gamma_;
  Var beta_;
};

/// Two-layer GELU perceptron.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, Index in, Index hidden,
      Index out, std::mt19937_64& rng);
  Var operator()(const Var& x, const ForwardContext& ctx) const;

 private:
  Linear fc1_;
  Linear fc2_;
};

/// Dense scaled dot-product attention. `bias` is added to the attention
/// logits before the softmax; it is either Lq×Lk or a 1×Lk row shared by
/// all queries.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name, Index dim,
                     int heads, std::mt19937_64& rng);
  Var operator()(const Var& query, const Var& memory,
                 const std::optional<Var>& bias = std::nullopt) const;

 private:
  Linear q_, k_, v_, o_;
  int heads_ = 1;
  Index head_dim_ = 0;
};

/// Pre-norm transformer block with optional cross-attention.
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(ParameterStore& store, const std::string& name, Index dim,
                   int heads, double mlp_ratio, bool cross_attention,
                   std::mt19937_64& rng);

  Var operator()(const Var& x, const ForwardContext& ctx,
                 const std::optional<Var>& self_bias = std::nullopt,
                 const Var* memory = nullptr,
                 const std::optional<Var>& cross_bias = std::nullopt) const;

 private:
  LayerNorm ln_self_;
  MultiHeadAttention self_attn_;
  bool has_cross_ = false;
  LayerNorm ln_cross_;
  MultiHeadAttention cross_attn_;
  LayerNorm ln_mlp_;
  Mlp mlp_;
};

/// Fixed sinusoidal position table, rows = positions.
Matrix sinusoidal_encoding(Index positions, Index dim);

/// Additive mask forbidding attention to later positions.
Matrix causal_mask(Index length);

}  // namespace cap2sum::nn
