#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ren/networks.hpp"
#include "ren/trainer.hpp"

namespace ren {

struct DatasetConfig {
  std::string family = "one_moon";  // one_moon|circle|mnist|fashion_mnist|dsprites
  long n = 4096;            // toy: points generated; images: subsample size (0 = all)
  double noise_frac = 0.1;  // toy only
  double radius = 1.0;      // toy only
  std::uint64_t seed = 42;  // generation / subsample stream
  std::string train_images, train_labels;  // image families
  std::string test_images, test_labels;

  bool is_toy() const { return family == "one_moon" || family == "circle"; }
};

struct EvalConfig {
  long n_generate = 1000;
  std::uint64_t seed = 7;
  bool unbiased_energy = false;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  ModelSpec model;
  TrainConfig train;
  EvalConfig eval;
  std::string output_dir = "runs/out";
};

/// Parses "key = value" lines ('#' comments, blank lines skipped). Malformed
/// lines and duplicate keys are appended to errors.
std::map<std::string, std::string> parse_kv(const std::string& text,
                                            std::vector<std::string>& errors);

/// Builds a config from parsed keys. Unset train fields take the family
/// defaults; unknown keys and unparseable values are appended to errors.
ExperimentConfig config_from_kv(const std::map<std::string, std::string>& kv,
                                std::vector<std::string>& errors);

/// Every violation at once (ranges, path existence, cross-field rules);
/// an empty result means the config is usable.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

/// Parse + build + validate; collects every problem instead of stopping at
/// the first.
ExperimentConfig parse_config_text(const std::string& text,
                                   std::vector<std::string>& errors);

/// Reads, parses, and validates; throws std::invalid_argument listing every
/// violation on its own line.
ExperimentConfig load_config(const std::string& path);

/// Canonical listing of every effective key, one "key = value" per line, in
/// fixed order. Identical configs produce identical echoes.
std::string config_echo(const ExperimentConfig& cfg);

/// FNV-1a 64-bit hash, 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);
/// Hash of the canonical echo; the run identity recorded in manifests and
/// result records.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace ren
