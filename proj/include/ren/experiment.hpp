#pragma once

#include <string>

#include "ren/config.hpp"
#include "ren/datasets.hpp"
#include "ren/metrics.hpp"

namespace ren {

/// File layout of one run directory.
struct RunPaths {
  std::string dir;
  explicit RunPaths(std::string d) : dir(std::move(d)) {}
  std::string checkpoint() const { return dir + "/model.ckpt"; }
  std::string train_log() const { return dir + "/train_log.jsonl"; }
  std::string manifest() const { return dir + "/manifest.json"; }
  std::string results() const { return dir + "/results.jsonl"; }
};

struct LoadedData {
  DataMatrix train;
  DataMatrix test;
};

/// Materializes the configured dataset. Toy families generate train and an
/// equally sized held-out test draw; image families read the IDX files and
/// apply the stratified subsample to the training split when dataset.n > 0.
LoadedData load_dataset(const DatasetConfig& ds);

/// Trains per the config, then writes model.ckpt, train_log.jsonl, and
/// manifest.json (config echo + hash, checkpoint content hash, seed, wall
/// time) under output_dir. Returns the trained model.
RenModel run_train(const ExperimentConfig& cfg);

struct EvalOutcome {
  double mse = 0;
  double energy = 0;
  RelevanceReport report;
};

/// Restores the checkpoint, scores the test split, and appends one record per
/// metric to results.jsonl (metric, value, config_hash, seed).
EvalOutcome run_eval(const ExperimentConfig& cfg,
                     const std::string& checkpoint_path);

/// Writes reconstructions.tsv, latents.tsv, generated.tsv, and relevance.tsv
/// under output_dir from the restored checkpoint.
void run_dump_plots(const ExperimentConfig& cfg,
                    const std::string& checkpoint_path);

/// Human-readable checkpoint summary: config echo, parameter table, totals.
std::string inspect_checkpoint(const std::string& path);

/// Hash of a file's raw bytes (FNV-1a, 16 hex digits).
std::string file_hash(const std::string& path);

/// Rebuilds the architecture a checkpoint expects from its stored config
/// echo, then restores parameters into it.
RenModel model_from_checkpoint(const std::string& path, ExperimentConfig& cfg);

}  // namespace ren
