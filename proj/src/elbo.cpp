#include "ren/elbo.hpp"

#include <stdexcept>

namespace ren {

namespace {

// Shared by every objective variant. Randomness contract: z noise comes from
// rng.child("z_eps") in row-major order, so callers can reproduce the draws.
struct Core {
  DiagGaussian q;
  Tensor z;
  Tensor recon;
  Tensor ne_qz;
};

Core forward_core(const RenModel& m, const Tensor& X, RngStream& rng) {
  if (X.rank() != 2 || X.shape()[1] != m.D) {
    throw std::invalid_argument("elbo: X must be {N," + std::to_string(m.D) +
                                "}, got " + shape_str(X.shape()));
  }
  Core c;
  c.q = encode(m, X);
  RngStream rz = rng.child("z_eps");
  c.z = gaussian_rsample(c.q, rz);
  Tensor mu_x = decode(m, c.z);
  // log_sigma_dec is a scalar shared across every output dimension.
  c.recon = mean(gaussian_log_prob(X, DiagGaussian{mu_x, m.decoder.log_sigma_dec}));
  c.ne_qz = mean(gaussian_log_prob(c.z, c.q));
  return c;
}

Tensor prior_z_term(const RenModel& m, const Tensor& z, const Tensor& alpha) {
  if (m.variant == "dpvae") {
    if (m.alpha_scaled_flow) {
      return mean(flow_prior_log_prob(z, *m.flow, alpha));
    }
    return mean(flow_prior_log_prob(z, *m.flow));
  }
  return mean(latent_prior_log_prob(z, alpha));
}

Tensor assemble_total(const ElboBreakdown& b) {
  return b.recon - b.neg_entropy_q_z - b.neg_entropy_q_alpha + b.prior_z +
         b.prior_alpha;
}

ElboBreakdown elbo_ren(const RenModel& m, const Tensor& X, RngStream& rng) {
  const long n = X.shape()[0];
  if (n < 2) {
    throw std::invalid_argument(
        "elbo_ren: relevance inference needs at least 2 rows, got " +
        std::to_string(n));
  }
  Core c = forward_core(m, X, rng);

  ElboBreakdown b;
  b.q_alpha = infer_relevance(m, X, c.z);
  RngStream ra = rng.child("alpha");
  b.alpha = gamma_implicit_rsample(b.q_alpha, ra);

  // alpha is shared by the whole dataset, so its two terms carry 1/N weight
  // next to the per-row averages.
  const double inv_n = 1.0 / static_cast<double>(n);
  b.neg_entropy_q_alpha = gamma_log_prob(b.alpha, b.q_alpha) * inv_n;
  GammaParams prior{Tensor::full({m.L}, m.prior_a),
                    Tensor::full({m.L}, m.prior_b)};
  b.prior_alpha = gamma_log_prob(b.alpha, prior) * inv_n;

  b.recon = c.recon;
  b.neg_entropy_q_z = c.ne_qz;
  b.prior_z = prior_z_term(m, c.z, b.alpha);
  b.total = assemble_total(b);
  return b;
}

}  // namespace

ElboBreakdown elbo_ren_vae(const RenModel& m, const Tensor& X,
                           RngStream& rng) {
  if (m.variant != "vae") {
    throw std::invalid_argument("elbo_ren_vae: model variant is not vae");
  }
  return elbo_ren(m, X, rng);
}

ElboBreakdown elbo_ren_dpvae(const RenModel& m, const Tensor& X,
                             RngStream& rng) {
  if (m.variant != "dpvae") {
    throw std::invalid_argument("elbo_ren_dpvae: model variant is not dpvae");
  }
  return elbo_ren(m, X, rng);
}

ElboBreakdown elbo_plain(const RenModel& m, const Tensor& X, RngStream& rng,
                         const std::string& variant) {
  if (variant != "vae" && variant != "dpvae") {
    throw std::invalid_argument(
        "elbo_plain: variant must be vae or dpvae, got " + variant);
  }
  if (variant != m.variant) {
    throw std::invalid_argument("elbo_plain: variant does not match the model");
  }
  if (X.rank() != 2 || X.shape()[0] < 1) {
    throw std::invalid_argument("elbo_plain: X must have at least one row");
  }
  Core c = forward_core(m, X, rng);

  ElboBreakdown b;
  b.recon = c.recon;
  b.neg_entropy_q_z = c.ne_qz;
  b.neg_entropy_q_alpha = Tensor::scalar(0.0);
  b.prior_alpha = Tensor::scalar(0.0);
  Tensor alpha_fixed = Tensor::constant({m.L}, m.current_alpha);
  b.prior_z = prior_z_term(m, c.z, alpha_fixed);
  b.total = assemble_total(b);
  return b;
}

}  // namespace ren
