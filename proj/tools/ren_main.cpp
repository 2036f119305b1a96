#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ren/checkpoint.hpp"
#include "ren/experiment.hpp"

namespace {

using namespace ren;

struct CommonFlags {
  std::string config_path;
  std::string checkpoint_path;
  std::string dataset_family;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  long n_generate = 0;
  bool n_generate_given = false;
};

void add_flags(CLI::App* cmd, CommonFlags& f, bool with_checkpoint) {
  cmd->add_option("--config", f.config_path, "experiment config file");
  if (with_checkpoint)
    cmd->add_option("--checkpoint", f.checkpoint_path, "model checkpoint");
  cmd->add_option("--dataset", f.dataset_family,
                  "dataset family (defaults for everything else)");
  cmd->add_option("--out", f.out_dir, "output directory override");
  cmd->add_option("--seed", f.seed, "seed override")
      ->each([&f](const std::string&) { f.seed_given = true; });
  cmd->add_option("--n-generate", f.n_generate, "sample count override")
      ->each([&f](const std::string&) { f.n_generate_given = true; });
}

/// Config precedence: --config file, else --dataset family with defaults,
/// else the checkpoint's stored config.
ExperimentConfig resolve_config(const CommonFlags& f) {
  if (!f.config_path.empty()) return load_config(f.config_path);
  std::string text;
  if (!f.dataset_family.empty())
    text = "dataset.family = " + f.dataset_family + "\n";
  else if (!f.checkpoint_path.empty())
    text = read_checkpoint_echo(f.checkpoint_path);
  else
    throw std::invalid_argument(
        "need --config, --dataset, or --checkpoint to determine the setup");
  std::vector<std::string> errors;
  ExperimentConfig cfg = parse_config_text(text, errors);
  if (!errors.empty()) {
    std::string msg = "config: " + std::to_string(errors.size()) +
                      " problem(s):";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  return cfg;
}

int cmd_train(const CommonFlags& f) {
  ExperimentConfig cfg = resolve_config(f);
  if (!f.out_dir.empty()) cfg.output_dir = f.out_dir;
  if (f.seed_given) cfg.train.seed = f.seed;
  const RenModel m = run_train(cfg);
  const RunPaths paths(cfg.output_dir);
  std::cout << "trained " << cfg.dataset.family << " (" << cfg.model.variant
            << ", L=" << cfg.model.L << ") for " << cfg.train.epochs
            << " epochs\n";
  std::cout << "checkpoint: " << paths.checkpoint() << "\n";
  std::cout << "checkpoint_hash: " << file_hash(paths.checkpoint()) << "\n";
  std::cout << "alpha:";
  for (double a : m.current_alpha) std::printf(" %.6g", a);
  std::cout << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& f) {
  if (f.checkpoint_path.empty())
    throw std::invalid_argument("eval: --checkpoint is required");
  ExperimentConfig cfg = resolve_config(f);
  if (!f.out_dir.empty()) cfg.output_dir = f.out_dir;
  if (f.seed_given) cfg.eval.seed = f.seed;
  if (f.n_generate_given) cfg.eval.n_generate = f.n_generate;
  const EvalOutcome out = run_eval(cfg, f.checkpoint_path);
  std::printf("recon_mse: %.17g\n", out.mse);
  std::printf("l_star: %ld\n", out.report.l_star);
  if (!std::isnan(out.energy))
    std::printf("energy_distance: %.17g\n", out.energy);
  std::cout << "variances:";
  for (double v : out.report.variances) std::printf(" %.6g", v);
  std::cout << "\n";
  const RunPaths paths(cfg.output_dir);
  std::cout << "results: " << paths.results() << "\n";
  return 0;
}

int cmd_dump_plots(const CommonFlags& f) {
  if (f.checkpoint_path.empty())
    throw std::invalid_argument("dump-plots: --checkpoint is required");
  ExperimentConfig cfg = resolve_config(f);
  if (!f.out_dir.empty()) cfg.output_dir = f.out_dir;
  if (f.seed_given) cfg.eval.seed = f.seed;
  if (f.n_generate_given) cfg.eval.n_generate = f.n_generate;
  run_dump_plots(cfg, f.checkpoint_path);
  for (const char* name :
       {"reconstructions.tsv", "latents.tsv", "generated.tsv",
        "relevance.tsv"})
    std::cout << cfg.output_dir << "/" << name << "\n";
  return 0;
}

int cmd_gen_data(const CommonFlags& f) {
  ExperimentConfig cfg = resolve_config(f);
  if (f.seed_given) cfg.dataset.seed = f.seed;
  if (f.n_generate_given) cfg.dataset.n = f.n_generate;
  const std::string dir = f.out_dir.empty() ? cfg.output_dir : f.out_dir;
  std::filesystem::create_directories(dir);

  if (cfg.dataset.is_toy()) {
    const ToySpec spec{cfg.dataset.family, cfg.dataset.n,
                       cfg.dataset.noise_frac, cfg.dataset.radius,
                       cfg.dataset.seed};
    const DataMatrix pts = gen_toy(spec);
    const std::string path = dir + "/" + cfg.dataset.family + ".tsv";
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("gen-data: cannot open " + path);
    for (long i = 0; i < pts.n; ++i) {
      for (long j = 0; j < pts.d; ++j) {
        if (j) os << '\t';
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", pts.at(i, j));
        os << buf;
      }
      os << "\n";
    }
    std::cout << path << "\n";
    return 0;
  }

  // Image families: materialize the (optionally subsampled) train split as a
  // fresh IDX pair, so reduced experiments can point at plain files.
  ImageSet set = load_idx(cfg.dataset.train_images, cfg.dataset.train_labels);
  if (cfg.dataset.n > 0) set = subsample(set, cfg.dataset.n, cfg.dataset.seed);
  std::vector<std::uint8_t> pixels(set.images.v.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = std::round(set.images.v[i] * 255.0);
    pixels[i] = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, v)));
  }
  const std::string images_path = dir + "/train-images-idx3-ubyte";
  write_idx(images_path, pixels, set.images.n, set.height, set.width);
  std::cout << images_path << "\n";
  if (!set.labels.empty()) {
    std::vector<std::uint8_t> labels(set.labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
      labels[i] = static_cast<std::uint8_t>(set.labels[i]);
    const std::string labels_path = dir + "/train-labels-idx1-ubyte";
    write_idx_labels(labels_path, labels);
    std::cout << labels_path << "\n";
  }
  return 0;
}

int cmd_inspect(const CommonFlags& f) {
  if (f.checkpoint_path.empty())
    throw std::invalid_argument("inspect: --checkpoint is required");
  std::cout << inspect_checkpoint(f.checkpoint_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relevance encoding network experiments"};
  app.require_subcommand(1);

  CommonFlags train_f, eval_f, dump_f, gen_f, inspect_f;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model from a config");
  add_flags(train_cmd, train_f, false);
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score a checkpoint on a dataset");
  add_flags(eval_cmd, eval_f, true);
  CLI::App* dump_cmd =
      app.add_subcommand("dump-plots", "write plot data files");
  add_flags(dump_cmd, dump_f, true);
  CLI::App* gen_cmd =
      app.add_subcommand("gen-data", "write datasets to disk");
  add_flags(gen_cmd, gen_f, false);
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect", "print a checkpoint summary");
  add_flags(inspect_cmd, inspect_f, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_f);
    if (eval_cmd->parsed()) return cmd_eval(eval_f);
    if (dump_cmd->parsed()) return cmd_dump_plots(dump_f);
    if (gen_cmd->parsed()) return cmd_gen_data(gen_f);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_f);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 2;
}
