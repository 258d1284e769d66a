// SPDX-License-Identifier: Apache-2.0
#include "cap2sum/optim.hpp"

#include <cmath>

namespace cap2sum {

Adam::Adam(std::vector<ag::Var> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.has_grad()) continue;
    const Matrix& g = p.grad();
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    if (cfg_.learning_rate == 0.0) continue;
    const Matrix m_hat = m_[i] / bc1;
    const Matrix v_hat = v_[i] / bc2;
    p.mutable_value().array() -=
        cfg_.learning_rate * m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double clip_grad_norm(std::span<ag::Var> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    if (p.has_grad()) sq += p.grad().squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (auto& p : params)
      if (p.has_grad()) p.mutable_grad() *= s;
  }
  return norm;
}

std::vector<ag::Var> collect(const nn::ParameterStore& store) {
  std::vector<ag::Var> out;
  for (const auto& p : store.parameters()) out.push_back(p.var);
  return out;
}

}  // namespace cap2sum
