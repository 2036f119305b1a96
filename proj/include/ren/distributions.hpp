#pragma once

#include "ren/rng.hpp"
#include "ren/tensor.hpp"

namespace ren {

/// Diagonal Gaussian with sigma = exp(log_sigma). Row i of mu/log_sigma
/// parameterizes the distribution of sample i when rank 2.
struct DiagGaussian {
  Tensor mu;
  Tensor log_sigma;
};

/// Per-dimension Gamma concentration (a) and rate (b); both same shape.
struct GammaParams {
  Tensor concentration;
  Tensor rate;
};

/// Log-density summed over the last axis: rank-2 input gives one value per
/// row, rank-1 gives a scalar.
Tensor gaussian_log_prob(const Tensor& x, const DiagGaussian& d);

/// z = mu + exp(log_sigma) * eps with eps ~ N(0, I); differentiable in mu
/// and log_sigma.
Tensor gaussian_rsample(const DiagGaussian& d, RngStream& rng);

/// Exact entropy summed over the last axis.
Tensor gaussian_entropy(const DiagGaussian& d);

/// Gamma log-density (rate convention) summed over the last axis.
Tensor gamma_log_prob(const Tensor& alpha, const GammaParams& g);

/// Draws alpha ~ Gamma(a, b) elementwise and attaches implicit
/// reparameterization gradients: d(alpha)/db = -alpha/b exactly and
/// d(alpha)/da = -(dF/da)/(dF/dalpha) with the CDF shape derivative taken by
/// central differences (step 1e-4 * max(1, a)).
Tensor gamma_implicit_rsample(const GammaParams& g, RngStream& rng);

/// Zero-mean Gaussian with per-dimension precision alpha, summed over the
/// last axis; alpha broadcasts against z.
Tensor latent_prior_log_prob(const Tensor& z, const Tensor& alpha);

}  // namespace ren
