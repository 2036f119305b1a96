#pragma once

#include <vector>

#include "ren/datasets.hpp"
#include "ren/networks.hpp"

namespace ren {

/// Variance ranking of latent dimensions. variances holds 1/alpha sorted
/// descending (ties broken by original index); order maps each rank to the
/// original dimension; l_star is the smallest k whose top-k cumulative
/// explained-variance ratio reaches 0.95.
struct RelevanceReport {
  std::vector<double> alpha;      // original order
  std::vector<long> order;        // rank -> original dimension
  std::vector<double> variances;  // descending
  std::vector<double> explained_ratio;
  std::vector<double> cumulative;
  long l_star = 0;
};

RelevanceReport relevance_report(const std::vector<double>& alpha);
/// Same ranking applied to externally measured per-dimension variances.
RelevanceReport report_from_variances(const std::vector<double>& variances);

/// Mean over samples and dimensions of (x - decode(encoder mean))^2; no
/// sampling anywhere.
double recon_mse(const RenModel& m, const DataMatrix& X);

/// 2 E||a-b|| - E||a-a'|| - E||b-b'|| over all pairs. The default V-statistic
/// form is exactly zero for identical sample sets; unbiased excludes the
/// within-set diagonal.
double energy_distance(const DataMatrix& A, const DataMatrix& B,
                       bool unbiased = false);

/// Draws n model samples: dpvae inverts the flow from its base distribution
/// (N(0,I), or N(0, alpha^-1 I) when the model scales the base), vae samples
/// N(0, alpha^-1 I) directly; x is the decoder mean.
struct GenerateResult {
  DataMatrix x;
  DataMatrix z;  // the latents fed to the decoder
};
GenerateResult generate_with_latents(const RenModel& m, long n,
                                     RngStream& rng);
DataMatrix generate(const RenModel& m, long n, RngStream& rng);

}  // namespace ren
