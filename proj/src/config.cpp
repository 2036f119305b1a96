#include "ren/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ren {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Tracks which keys were consumed so leftovers can be reported as unknown.
struct KvReader {
  const std::map<std::string, std::string>& kv;
  std::vector<std::string>& errors;
  std::set<std::string> used;

  bool has(const std::string& key) const { return kv.count(key) != 0; }

  const std::string* raw(const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return nullptr;
    used.insert(key);
    return &it->second;
  }

  void str(const std::string& key, std::string& out) {
    if (const std::string* v = raw(key)) out = *v;
  }

  void i64(const std::string& key, long& out) {
    const std::string* v = raw(key);
    if (!v) return;
    try {
      std::size_t pos = 0;
      const long parsed = std::stol(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      out = parsed;
    } catch (const std::exception&) {
      errors.push_back(key + ": expected integer, got '" + *v + "'");
    }
  }

  void u64(const std::string& key, std::uint64_t& out) {
    const std::string* v = raw(key);
    if (!v) return;
    try {
      std::size_t pos = 0;
      const unsigned long long parsed = std::stoull(*v, &pos);
      if (pos != v->size() || v->front() == '-') throw std::invalid_argument("");
      out = parsed;
    } catch (const std::exception&) {
      errors.push_back(key + ": expected unsigned integer, got '" + *v + "'");
    }
  }

  void f64(const std::string& key, double& out) {
    const std::string* v = raw(key);
    if (!v) return;
    try {
      std::size_t pos = 0;
      const double parsed = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      out = parsed;
    } catch (const std::exception&) {
      errors.push_back(key + ": expected number, got '" + *v + "'");
    }
  }

  void flag(const std::string& key, bool& out) {
    const std::string* v = raw(key);
    if (!v) return;
    if (*v == "true" || *v == "1")
      out = true;
    else if (*v == "false" || *v == "0")
      out = false;
    else
      errors.push_back(key + ": expected true|false, got '" + *v + "'");
  }

  void report_unknown() {
    for (const auto& [key, value] : kv)
      if (!used.count(key)) errors.push_back("unknown key '" + key + "'");
  }
};

std::string model_family(const std::string& dataset_family) {
  if (dataset_family == "one_moon" || dataset_family == "circle") return "toy";
  if (dataset_family == "mnist" || dataset_family == "fashion_mnist")
    return "mnist";
  if (dataset_family == "dsprites") return "dsprites";
  return "";
}

void check_path(const std::string& key, const std::string& path,
                bool required, std::vector<std::string>& errors) {
  if (path.empty()) {
    if (required) errors.push_back(key + ": required for image datasets");
    return;
  }
  if (!std::filesystem::exists(path))
    errors.push_back(key + ": file not found: " + path);
}

}  // namespace

std::map<std::string, std::string> parse_kv(const std::string& text,
                                            std::vector<std::string>& errors) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) +
                       ": expected 'key = value', got '" + t + "'");
      continue;
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (!kv.emplace(key, value).second)
      errors.push_back("line " + std::to_string(lineno) + ": duplicate key '" +
                       key + "'");
  }
  return kv;
}

ExperimentConfig config_from_kv(const std::map<std::string, std::string>& kv,
                                std::vector<std::string>& errors) {
  ExperimentConfig cfg;
  KvReader r{kv, errors, {}};

  r.str("dataset.family", cfg.dataset.family);
  const std::string fam = model_family(cfg.dataset.family);
  cfg.model.family = fam.empty() ? "toy" : fam;
  cfg.train = default_config(cfg.model.family);

  r.i64("dataset.n", cfg.dataset.n);
  r.f64("dataset.noise_frac", cfg.dataset.noise_frac);
  r.f64("dataset.radius", cfg.dataset.radius);
  r.u64("dataset.seed", cfg.dataset.seed);
  r.str("dataset.train_images", cfg.dataset.train_images);
  r.str("dataset.train_labels", cfg.dataset.train_labels);
  r.str("dataset.test_images", cfg.dataset.test_images);
  r.str("dataset.test_labels", cfg.dataset.test_labels);

  r.str("model.variant", cfg.model.variant);
  r.i64("model.L", cfg.model.L);
  long blocks = cfg.model.flow_blocks;
  r.i64("model.flow_blocks", blocks);
  cfg.model.flow_blocks = static_cast<int>(blocks);
  r.flag("model.alpha_scaled_flow", cfg.model.alpha_scaled_flow);

  const bool burnin_given = r.has("train.burnin");
  r.i64("train.epochs", cfg.train.epochs);
  if (!burnin_given) cfg.train.burnin = std::max<long>(1, cfg.train.epochs / 10);
  r.i64("train.burnin", cfg.train.burnin);
  r.f64("train.lr_vae", cfg.train.lr_vae);
  r.f64("train.lr_ren", cfg.train.lr_ren);
  r.i64("train.r", cfg.train.r);
  r.i64("train.batch_size", cfg.train.batch_size);
  r.u64("train.seed", cfg.train.seed);
  r.f64("train.clip_norm", cfg.train.clip_norm);

  r.i64("eval.n_generate", cfg.eval.n_generate);
  r.u64("eval.seed", cfg.eval.seed);
  r.flag("eval.unbiased_energy", cfg.eval.unbiased_energy);

  r.str("output_dir", cfg.output_dir);
  r.report_unknown();
  return cfg;
}

std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> errors;
  const std::string fam = model_family(cfg.dataset.family);
  if (fam.empty())
    errors.push_back("dataset.family: unknown family '" + cfg.dataset.family +
                     "' (expected one_moon|circle|mnist|fashion_mnist|dsprites)");

  if (cfg.dataset.is_toy()) {
    if (cfg.dataset.n < 1) errors.push_back("dataset.n: must be at least 1");
    if (cfg.dataset.noise_frac < 0)
      errors.push_back("dataset.noise_frac: must be non-negative");
    if (!(cfg.dataset.radius > 0))
      errors.push_back("dataset.radius: must be positive");
  } else if (!fam.empty()) {
    if (cfg.dataset.n < 0)
      errors.push_back("dataset.n: must be non-negative (0 = use all)");
    check_path("dataset.train_images", cfg.dataset.train_images, true, errors);
    check_path("dataset.train_labels", cfg.dataset.train_labels, false, errors);
    check_path("dataset.test_images", cfg.dataset.test_images, false, errors);
    check_path("dataset.test_labels", cfg.dataset.test_labels, false, errors);
  }

  if (cfg.model.variant != "vae" && cfg.model.variant != "dpvae")
    errors.push_back("model.variant: expected vae|dpvae, got '" +
                     cfg.model.variant + "'");
  if (cfg.model.L < 1) errors.push_back("model.L: must be at least 1");
  if (cfg.model.flow_blocks < 0)
    errors.push_back("model.flow_blocks: must be non-negative");

  if (cfg.train.epochs < 1) errors.push_back("train.epochs: must be at least 1");
  if (cfg.train.burnin < 1 || cfg.train.burnin >= cfg.train.epochs)
    errors.push_back("train.burnin: need 1 <= burnin < epochs, got " +
                     std::to_string(cfg.train.burnin) + " with epochs " +
                     std::to_string(cfg.train.epochs));
  if (!(cfg.train.lr_vae > 0)) errors.push_back("train.lr_vae: must be positive");
  if (!(cfg.train.lr_ren > 0)) errors.push_back("train.lr_ren: must be positive");
  if (cfg.train.r < 1) errors.push_back("train.r: must be at least 1");
  if (cfg.train.batch_size < 1)
    errors.push_back("train.batch_size: must be at least 1");
  else if (cfg.train.r >= 1 && cfg.train.batch_size % cfg.train.r != 0)
    errors.push_back("train.batch_size: must be divisible by train.r (" +
                     std::to_string(cfg.train.batch_size) + " % " +
                     std::to_string(cfg.train.r) + " != 0)");
  if (cfg.train.clip_norm < 0)
    errors.push_back("train.clip_norm: must be non-negative");
  if (cfg.dataset.is_toy() && cfg.dataset.n >= 1 &&
      cfg.train.batch_size > cfg.dataset.n)
    errors.push_back("train.batch_size: exceeds dataset.n (" +
                     std::to_string(cfg.train.batch_size) + " > " +
                     std::to_string(cfg.dataset.n) + ")");

  if (cfg.eval.n_generate < 0)
    errors.push_back("eval.n_generate: must be non-negative");
  if (cfg.output_dir.empty()) errors.push_back("output_dir: must be non-empty");
  return errors;
}

ExperimentConfig parse_config_text(const std::string& text,
                                   std::vector<std::string>& errors) {
  const auto kv = parse_kv(text, errors);
  ExperimentConfig cfg = config_from_kv(kv, errors);
  const auto post = validate_config(cfg);
  errors.insert(errors.end(), post.begin(), post.end());
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::vector<std::string> errors;
  ExperimentConfig cfg = parse_config_text(buf.str(), errors);
  if (!errors.empty()) {
    std::string msg = "config: " + std::to_string(errors.size()) +
                      " problem(s) in " + path + ":";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
  }
  return cfg;
}

std::string config_echo(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "dataset.family = " << cfg.dataset.family << "\n"
     << "dataset.n = " << cfg.dataset.n << "\n"
     << "dataset.noise_frac = " << fmt(cfg.dataset.noise_frac) << "\n"
     << "dataset.radius = " << fmt(cfg.dataset.radius) << "\n"
     << "dataset.seed = " << cfg.dataset.seed << "\n"
     << "dataset.train_images = " << cfg.dataset.train_images << "\n"
     << "dataset.train_labels = " << cfg.dataset.train_labels << "\n"
     << "dataset.test_images = " << cfg.dataset.test_images << "\n"
     << "dataset.test_labels = " << cfg.dataset.test_labels << "\n"
     << "model.variant = " << cfg.model.variant << "\n"
     << "model.L = " << cfg.model.L << "\n"
     << "model.flow_blocks = " << cfg.model.flow_blocks << "\n"
     << "model.alpha_scaled_flow = "
     << (cfg.model.alpha_scaled_flow ? "true" : "false") << "\n"
     << "train.epochs = " << cfg.train.epochs << "\n"
     << "train.burnin = " << cfg.train.burnin << "\n"
     << "train.lr_vae = " << fmt(cfg.train.lr_vae) << "\n"
     << "train.lr_ren = " << fmt(cfg.train.lr_ren) << "\n"
     << "train.r = " << cfg.train.r << "\n"
     << "train.batch_size = " << cfg.train.batch_size << "\n"
     << "train.seed = " << cfg.train.seed << "\n"
     << "train.clip_norm = " << fmt(cfg.train.clip_norm) << "\n"
     << "eval.n_generate = " << cfg.eval.n_generate << "\n"
     << "eval.seed = " << cfg.eval.seed << "\n"
     << "eval.unbiased_energy = "
     << (cfg.eval.unbiased_energy ? "true" : "false") << "\n"
     << "output_dir = " << cfg.output_dir << "\n";
  return os.str();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const ExperimentConfig& cfg) {
  return fnv1a_hex(config_echo(cfg));
}

}  // namespace ren
