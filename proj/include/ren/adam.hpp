#pragma once

#include <vector>

#include "ren/tensor.hpp"

namespace ren {

/// Adam over a fixed ordered parameter list. Moment buffers are keyed by
/// position, so the same list (same order, same shapes) must be passed to
/// every step. Gradients are cleared after each update.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);

  void step(const std::vector<Tensor>& params);

  double lr() const { return lr_; }

  // Checkpoint access.
  long step_count() const { return t_; }
  const std::vector<std::vector<double>>& m() const { return m_; }
  const std::vector<std::vector<double>>& v() const { return v_; }
  void restore(long step_count, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace ren
