#pragma once

#include <string>

#include "ren/networks.hpp"
#include "ren/rng.hpp"

namespace ren {

/// Five-term objective decomposition. total is assembled exactly as
/// recon - neg_entropy_q_z - neg_entropy_q_alpha + prior_z + prior_alpha,
/// left to right. All entries are scalars on the active tape.
struct ElboBreakdown {
  Tensor total;
  Tensor recon;               // E[log p(X|Z)]
  Tensor neg_entropy_q_z;     // E[log q(Z|X)], evaluated at the sample
  Tensor neg_entropy_q_alpha; // E[log q(alpha|X,Z)] / batch size
  Tensor prior_z;             // E[log p(Z|alpha)] or the flow form
  Tensor prior_alpha;         // E[log p(alpha)] / batch size

  // Set by the relevance-aware objectives, for the trainer.
  GammaParams q_alpha;
  Tensor alpha;  // the drawn relevance sample
};

/// Relevance objective with the N(0, alpha^-1 I) latent prior. One z sample
/// per row, one alpha sample per batch; needs at least two rows.
ElboBreakdown elbo_ren_vae(const RenModel& m, const Tensor& X, RngStream& rng);

/// Same with the flow prior in place of prior_z. The flow base is N(0, I)
/// unless the model requests the alpha-scaled base.
ElboBreakdown elbo_ren_dpvae(const RenModel& m, const Tensor& X,
                             RngStream& rng);

/// Burn-in / baseline objective: alpha fixed at model.current_alpha, both
/// hyperposterior terms zero. variant is "vae" or "dpvae".
ElboBreakdown elbo_plain(const RenModel& m, const Tensor& X, RngStream& rng,
                         const std::string& variant);

}  // namespace ren
