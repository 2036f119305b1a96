#include "ren/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ren/checkpoint.hpp"
#include "ren/trainer.hpp"

namespace ren {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

DataMatrix image_split(const std::string& images, const std::string& labels) {
  return load_idx(images, labels).images;
}

/// Encoder means for every row, chunked so one forward never exceeds
/// 1024 rows.
DataMatrix encode_means(const RenModel& m, const DataMatrix& X) {
  DataMatrix out;
  out.n = X.n;
  out.d = m.L;
  out.v.resize(static_cast<std::size_t>(X.n * m.L));
  std::vector<long> rows(static_cast<std::size_t>(X.n));
  std::iota(rows.begin(), rows.end(), 0L);
  for (long first = 0; first < X.n; first += 1024) {
    const long count = std::min<long>(1024, X.n - first);
    Tape tape;
    const Tensor xb = rows_to_tensor(X, rows, first, count);
    const Tensor mu = encode(m, xb).mu;
    const auto& d = mu.data();
    std::copy(d.begin(), d.end(),
              out.v.begin() + static_cast<std::size_t>(first * m.L));
  }
  return out;
}

DataMatrix decode_means(const RenModel& m, const DataMatrix& Z) {
  DataMatrix out;
  out.n = Z.n;
  out.d = m.D;
  out.v.resize(static_cast<std::size_t>(Z.n * m.D));
  std::vector<long> rows(static_cast<std::size_t>(Z.n));
  std::iota(rows.begin(), rows.end(), 0L);
  for (long first = 0; first < Z.n; first += 1024) {
    const long count = std::min<long>(1024, Z.n - first);
    Tape tape;
    const Tensor zb = rows_to_tensor(Z, rows, first, count);
    const Tensor xhat = decode(m, zb);
    const auto& d = xhat.data();
    std::copy(d.begin(), d.end(),
              out.v.begin() + static_cast<std::size_t>(first * m.D));
  }
  return out;
}

void write_rows(const std::string& path, const DataMatrix& a,
                const DataMatrix* b = nullptr,
                const std::string& header = "") {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("dump: cannot open " + path);
  if (!header.empty()) os << header << "\n";
  for (long i = 0; i < a.n; ++i) {
    for (long j = 0; j < a.d; ++j) {
      if (j) os << '\t';
      os << fmt(a.at(i, j));
    }
    if (b)
      for (long j = 0; j < b->d; ++j) os << '\t' << fmt(b->at(i, j));
    os << "\n";
  }
  if (!os) throw std::runtime_error("dump: write failed: " + path);
}

void append_results(const std::string& path,
                    const std::vector<nlohmann::json>& records) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw std::runtime_error("eval: cannot open " + path);
  for (const auto& rec : records) os << rec.dump() << "\n";
  if (!os) throw std::runtime_error("eval: write failed: " + path);
}

}  // namespace

LoadedData load_dataset(const DatasetConfig& ds) {
  LoadedData out;
  if (ds.is_toy()) {
    ToySpec spec{ds.family, ds.n, ds.noise_frac, ds.radius, ds.seed};
    out.train = gen_toy(spec);
    spec.seed = ds.seed + 1;  // held-out draw from the same manifold
    out.test = gen_toy(spec);
    return out;
  }
  ImageSet train = load_idx(ds.train_images, ds.train_labels);
  if (ds.n > 0) train = subsample(train, ds.n, ds.seed);
  out.train = std::move(train.images);
  if (!ds.test_images.empty())
    out.test = image_split(ds.test_images, ds.test_labels);
  return out;
}

RenModel run_train(const ExperimentConfig& cfg) {
  const LoadedData data = load_dataset(cfg.dataset);
  std::filesystem::create_directories(cfg.output_dir);
  const RunPaths paths(cfg.output_dir);

  RngStream init = RngStream(cfg.train.seed).child("init");
  RenModel m = build_model(cfg.model, init);
  Adam opt_vae(cfg.train.lr_vae);
  Adam opt_ren(cfg.train.lr_ren);

  TrainConfig tcfg = cfg.train;
  tcfg.log_path = paths.train_log();

  const auto t0 = std::chrono::steady_clock::now();
  const TrainLog log = train(m, data.train, tcfg, opt_vae, opt_ren);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  const std::string echo = config_echo(cfg);
  save_checkpoint(paths.checkpoint(), m, echo, opt_vae, opt_ren);

  nlohmann::json manifest;
  manifest["config_hash"] = config_hash(cfg);
  manifest["checkpoint_hash"] = file_hash(paths.checkpoint());
  manifest["seed"] = cfg.train.seed;
  manifest["wall_seconds"] = wall;
  manifest["epochs"] = log.epochs.size();
  manifest["final_alpha"] = m.current_alpha;
  manifest["config"] = echo;
  std::ofstream os(paths.manifest(), std::ios::trunc);
  if (!os)
    throw std::runtime_error("train: cannot open " + paths.manifest());
  os << manifest.dump(2) << "\n";
  return m;
}

RenModel model_from_checkpoint(const std::string& path,
                               ExperimentConfig& cfg) {
  const std::string echo = read_checkpoint_echo(path);
  std::vector<std::string> errors;
  const auto kv = parse_kv(echo, errors);
  cfg = config_from_kv(kv, errors);
  if (!errors.empty()) {
    std::string msg = "checkpoint: stored config is unreadable:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::runtime_error(msg);
  }
  RngStream init = RngStream(cfg.train.seed).child("init");
  RenModel m = build_model(cfg.model, init);
  Adam opt_vae(cfg.train.lr_vae);
  Adam opt_ren(cfg.train.lr_ren);
  load_checkpoint(path, m, opt_vae, opt_ren);
  return m;
}

EvalOutcome run_eval(const ExperimentConfig& cfg,
                     const std::string& checkpoint_path) {
  ExperimentConfig stored;
  const RenModel m = model_from_checkpoint(checkpoint_path, stored);
  const LoadedData data = load_dataset(cfg.dataset);
  if (data.test.n == 0)
    throw std::runtime_error("eval: dataset has no test split");
  if (data.test.d != m.D)
    throw std::runtime_error("eval: model expects D=" + std::to_string(m.D) +
                             ", dataset provides D=" +
                             std::to_string(data.test.d));

  EvalOutcome out;
  out.mse = recon_mse(m, data.test);
  out.report = relevance_report(m.current_alpha);

  RngStream gen_rng(cfg.eval.seed);
  const DataMatrix gen = generate(m, cfg.eval.n_generate, gen_rng);
  const bool have_energy = gen.n >= 2 && data.test.n >= 2;
  if (have_energy)
    out.energy = energy_distance(data.test, gen, cfg.eval.unbiased_energy);
  else
    out.energy = std::nan("");

  std::filesystem::create_directories(cfg.output_dir);
  const RunPaths paths(cfg.output_dir);
  const std::string hash = config_hash(cfg);
  std::vector<nlohmann::json> records;
  records.push_back({{"metric", "recon_mse"},
                     {"value", out.mse},
                     {"config_hash", hash},
                     {"seed", cfg.eval.seed}});
  records.push_back({{"metric", "l_star"},
                     {"value", out.report.l_star},
                     {"config_hash", hash},
                     {"seed", cfg.eval.seed}});
  if (have_energy)
    records.push_back({{"metric", "energy_distance"},
                       {"value", out.energy},
                       {"config_hash", hash},
                       {"seed", cfg.eval.seed}});
  records.push_back({{"metric", "relevance_report"},
                     {"alpha", out.report.alpha},
                     {"order", out.report.order},
                     {"variances", out.report.variances},
                     {"explained_ratio", out.report.explained_ratio},
                     {"cumulative", out.report.cumulative},
                     {"l_star", out.report.l_star},
                     {"config_hash", hash},
                     {"seed", cfg.eval.seed}});
  append_results(paths.results(), records);
  return out;
}

void run_dump_plots(const ExperimentConfig& cfg,
                    const std::string& checkpoint_path) {
  ExperimentConfig stored;
  const RenModel m = model_from_checkpoint(checkpoint_path, stored);
  const LoadedData data = load_dataset(cfg.dataset);
  if (data.test.n == 0)
    throw std::runtime_error("dump: dataset has no test split");
  if (data.test.d != m.D)
    throw std::runtime_error("dump: model expects D=" + std::to_string(m.D) +
                             ", dataset provides D=" +
                             std::to_string(data.test.d));

  std::filesystem::create_directories(cfg.output_dir);
  const std::string dir = cfg.output_dir;

  const DataMatrix mu = encode_means(m, data.test);
  const DataMatrix xhat = decode_means(m, mu);
  write_rows(dir + "/reconstructions.tsv", data.test, &xhat);

  std::string alpha_note = "# alpha";
  for (double a : m.current_alpha) alpha_note += " " + fmt(a);
  write_rows(dir + "/latents.tsv", mu, nullptr, alpha_note);

  RngStream gen_rng(cfg.eval.seed);
  const DataMatrix gen = generate(m, cfg.eval.n_generate, gen_rng);
  write_rows(dir + "/generated.tsv", gen);

  const RelevanceReport rep = relevance_report(m.current_alpha);
  double total = 0;
  for (double v : rep.variances) total += v;
  std::ofstream os(dir + "/relevance.tsv", std::ios::trunc);
  if (!os) throw std::runtime_error("dump: cannot open " + dir + "/relevance.tsv");
  for (long d = 0; d < m.L; ++d) {
    const double v = 1.0 / m.current_alpha[static_cast<std::size_t>(d)];
    os << d << '\t' << fmt(v) << '\t' << fmt(v / total) << "\n";
  }
  if (!os) throw std::runtime_error("dump: write failed: relevance.tsv");
}

std::string inspect_checkpoint(const std::string& path) {
  ExperimentConfig stored;
  const RenModel m = model_from_checkpoint(path, stored);
  std::ostringstream os;
  os << "checkpoint: " << path << "\n";
  os << "content_hash: " << file_hash(path) << "\n";
  os << "parameters:\n";
  std::size_t total = 0;
  for (const auto& [name, t] : m.params_all()) {
    os << "  " << name << "  " << shape_str(t.shape()) << "  "
       << t.data().size() << "\n";
    total += t.data().size();
  }
  os << "total_parameters: " << total << "\n";
  os << "current_alpha:";
  for (double a : m.current_alpha) os << " " << fmt(a);
  os << "\n";
  os << "config:\n";
  std::istringstream echo(read_checkpoint_echo(path));
  std::string line;
  while (std::getline(echo, line)) os << "  " << line << "\n";
  return os.str();
}

std::string file_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("hash: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return fnv1a_hex(buf.str());
}

}  // namespace ren
