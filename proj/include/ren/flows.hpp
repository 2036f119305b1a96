#pragma once

#include <vector>

#include "ren/layers.hpp"
#include "ren/tensor.hpp"

namespace ren {

/// Affine coupling: coordinates with mask 1 pass through and drive the scale
/// and translation of the rest. Scale output is bounded by tanh * s_max.
struct CouplingBlock {
  std::vector<double> mask;  // entries in {0,1}, length L
  Mlp scale_net;
  Mlp translate_net;
  double s_max = 3.0;
};

struct FlowStack {
  long L = 0;
  std::vector<CouplingBlock> blocks;

  void collect(const std::string& prefix, NamedParams& out) const;
};

/// K blocks with alternating even/odd masks (block 0 keeps even coordinates);
/// scale/translate nets are L -> hidden -> hidden -> L with tanh activations.
FlowStack make_flow(long L, int blocks, RngStream& rng, long hidden = 64);

struct FlowResult {
  Tensor z0;       // same shape as input
  Tensor log_det;  // one value per row (rank-2 input) or scalar (rank-1)
};

FlowResult flow_forward(const Tensor& z, const FlowStack& f);
Tensor flow_inverse(const Tensor& z0, const FlowStack& f);

/// Standard-normal base density of z0 = g(z) plus the log-determinant.
Tensor flow_prior_log_prob(const Tensor& z, const FlowStack& f);

/// Density of z when alpha^(1/2) * z is pushed through the flow toward the
/// standard-normal base; reduces to N(0, alpha^-1 I) at the identity flow.
Tensor flow_prior_log_prob(const Tensor& z, const FlowStack& f,
                           const Tensor& alpha);

}  // namespace ren
