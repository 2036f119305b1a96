#include "ren/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ren {

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw std::invalid_argument("Adam: lr must be positive");
}

void Adam::step(const std::vector<Tensor>& params) {
  if (m_.empty()) {
    for (const Tensor& p : params) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }
  if (m_.size() != params.size())
    throw std::invalid_argument("Adam: parameter list size changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    if (!p.needs_grad())
      throw std::invalid_argument("Adam: parameter without gradient buffer");
    if (static_cast<long>(m_[i].size()) != p.numel())
      throw std::invalid_argument("Adam: parameter shape changed");
    auto& value = p.data();
    const auto& grad = p.grad();
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double g = grad[j];
      if (!std::isfinite(g))
        throw std::runtime_error("Adam: non-finite gradient at parameter " +
                                 std::to_string(i) + " element " +
                                 std::to_string(j));
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      value[j] -= lr_ * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + eps_);
    }
    p.zero_grad();
  }
}

void Adam::restore(long step_count, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
  if (m.size() != v.size())
    throw std::invalid_argument("Adam::restore: m and v sizes differ");
  t_ = step_count;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace ren
