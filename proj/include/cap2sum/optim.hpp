// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "cap2sum/nn.hpp"

namespace cap2sum {

struct AdamConfig {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed list of parameters. Parameters that received no
/// gradient in a step are left untouched.
class Adam {
 public:
  Adam(std::vector<ag::Var> params, AdamConfig cfg);

  void step();
  void zero_grad();
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  const AdamConfig& config() const { return cfg_; }
  long steps() const { return t_; }

 private:
  std::vector<ag::Var> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  AdamConfig cfg_;
  long t_ = 0;
};

/// Scales gradients so their global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
double clip_grad_norm(std::span<ag::Var> params, double max_norm);

std::vector<ag::Var> collect(const nn::ParameterStore& store);

}  // namespace cap2sum
