#include "spot/nn/optim.hpp"

#include <cmath>

namespace spot::nn {

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++step_count_;
  double clip = 1.0;
  if (options_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& p : params_)
      for (double g : p.node()->grad) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > options_.clip_norm) clip = options_.clip_norm / norm;
  }
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_count_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& grad = params_[i].node()->grad;
    if (grad.empty()) continue;
    auto values = params_[i].mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j] * clip;
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g;
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g * g;
      values[j] -= options_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + options_.epsilon);
    }
  }
}

}  // namespace spot::nn
