#pragma once

#include <string>
#include <vector>

#include "ren/adam.hpp"
#include "ren/datasets.hpp"
#include "ren/elbo.hpp"

namespace ren {

struct TrainConfig {
  long epochs = 0;
  long burnin = 0;  // relevance phase starts once epoch > burnin (1-indexed)
  double lr_vae = 1e-3;
  double lr_ren = 1e-5;
  long r = 4;  // sub-batches per large batch
  long batch_size = 0;
  std::uint64_t seed = 42;
  double clip_norm = 0.0;    // 0 disables gradient clipping
  std::string log_path;      // empty disables the epoch log file
};

/// Per-family defaults; burnin is 10% of epochs (at least 1).
TrainConfig default_config(const std::string& family);

struct EpochRecord {
  long epoch = 0;  // 1-indexed
  double total = 0, recon = 0, neg_entropy_q_z = 0, neg_entropy_q_alpha = 0,
         prior_z = 0, prior_alpha = 0;
  double log_sigma_dec = 0;
  std::vector<double> alpha;  // current_alpha at epoch end
  double seconds = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

/// Seeded in-place Fisher-Yates shuffle; the trainer's epoch shuffle.
void shuffle_indices(std::vector<long>& idx, RngStream& rng);

/// Alternating optimization: every epoch walks the shuffled data in large
/// batches, updating encoder/decoder (and flow) on r sub-batches with the
/// fixed-alpha objective at lr_vae; past burn-in each large batch additionally
/// takes one relevance step at lr_ren and refreshes current_alpha with the
/// hyperposterior mean. Mutates the model; optimizer states persist in the
/// caller's Adam instances.
TrainLog train(RenModel& m, const DataMatrix& data, const TrainConfig& cfg,
               Adam& opt_vae, Adam& opt_ren);

/// Convenience overload with internally constructed optimizers.
TrainLog train(RenModel& m, const DataMatrix& data, const TrainConfig& cfg);

}  // namespace ren
