#include "ren/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ren {

namespace {

void validate(const RenModel& m, const DataMatrix& data,
              const TrainConfig& cfg) {
  if (cfg.epochs < 1)
    throw std::invalid_argument("train: epochs must be positive");
  if (cfg.burnin < 1 || cfg.burnin >= cfg.epochs)
    throw std::invalid_argument("train: burnin must satisfy 1 <= burnin < epochs");
  if (cfg.r < 1) throw std::invalid_argument("train: r must be positive");
  if (cfg.batch_size < 1 || cfg.batch_size % cfg.r != 0)
    throw std::invalid_argument("train: batch_size must be positive and divisible by r");
  if (cfg.lr_vae <= 0.0 || cfg.lr_ren <= 0.0)
    throw std::invalid_argument("train: learning rates must be positive");
  if (data.d != m.D)
    throw std::invalid_argument("train: data dimension " +
                                std::to_string(data.d) +
                                " does not match model " + std::to_string(m.D));
  if (data.n < cfg.batch_size)
    throw std::invalid_argument("train: dataset has " + std::to_string(data.n) +
                                " rows, batch_size is " +
                                std::to_string(cfg.batch_size));
}

void check_finite(const ElboBreakdown& b, long epoch) {
  const std::pair<const char*, double> terms[] = {
      {"recon", b.recon.item()},
      {"neg_entropy_q_z", b.neg_entropy_q_z.item()},
      {"neg_entropy_q_alpha", b.neg_entropy_q_alpha.item()},
      {"prior_z", b.prior_z.item()},
      {"prior_alpha", b.prior_alpha.item()},
      {"total", b.total.item()},
  };
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v))
      throw std::runtime_error("train: non-finite " + std::string(name) +
                               " at epoch " + std::to_string(epoch));
}

void clip_grads(const std::vector<Tensor>& params, double clip) {
  if (clip <= 0.0) return;
  double sq = 0.0;
  for (const Tensor& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= clip) return;
  const double scale = clip / norm;
  for (const Tensor& p : params)
    for (double& g : p.node()->grad) g *= scale;
}

struct TermSums {
  double total = 0, recon = 0, ne_qz = 0, ne_qa = 0, pz = 0, pa = 0;
  long count = 0;

  void add(const ElboBreakdown& b) {
    total += b.total.item();
    recon += b.recon.item();
    ne_qz += b.neg_entropy_q_z.item();
    ne_qa += b.neg_entropy_q_alpha.item();
    pz += b.prior_z.item();
    pa += b.prior_alpha.item();
    ++count;
  }
};

void append_log_line(std::ofstream& out, const EpochRecord& rec) {
  nlohmann::json j;
  j["epoch"] = rec.epoch;
  j["total"] = rec.total;
  j["recon"] = rec.recon;
  j["neg_entropy_q_z"] = rec.neg_entropy_q_z;
  j["neg_entropy_q_alpha"] = rec.neg_entropy_q_alpha;
  j["prior_z"] = rec.prior_z;
  j["prior_alpha"] = rec.prior_alpha;
  j["log_sigma_dec"] = rec.log_sigma_dec;
  j["alpha"] = rec.alpha;
  j["seconds"] = rec.seconds;
  out << j.dump() << "\n";
  out.flush();
}

}  // namespace

TrainConfig default_config(const std::string& family) {
  TrainConfig cfg;
  if (family == "toy") {
    cfg.epochs = 1500;
    cfg.batch_size = 128;
  } else if (family == "mnist" || family == "fashion_mnist") {
    cfg.epochs = 100;
    cfg.batch_size = 100;
  } else if (family == "dsprites") {
    cfg.epochs = 100;
    cfg.batch_size = 128;
  } else {
    throw std::invalid_argument("default_config: unknown family " + family);
  }
  cfg.burnin = std::max<long>(1, cfg.epochs / 10);
  return cfg;
}

void shuffle_indices(std::vector<long>& idx, RngStream& rng) {
  for (long i = static_cast<long>(idx.size()) - 1; i > 0; --i) {
    const long j =
        static_cast<long>(rng.uniform() * static_cast<double>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(j)]);
  }
}

TrainLog train(RenModel& m, const DataMatrix& data, const TrainConfig& cfg,
               Adam& opt_vae, Adam& opt_ren) {
  validate(m, data, cfg);
  const long nb = data.n / cfg.batch_size;
  const long sub = cfg.batch_size / cfg.r;
  auto vae_params = m.vae_phase_params();
  auto ren_params = m.ren_phase_params();
  const bool dpvae = m.variant == "dpvae";

  std::ofstream log_out;
  if (!cfg.log_path.empty()) {
    log_out.open(cfg.log_path, std::ios::trunc);
    if (!log_out)
      throw std::runtime_error("train: cannot open log file " + cfg.log_path);
  }

  RngStream root(cfg.seed);
  std::vector<long> idx(static_cast<std::size_t>(data.n));
  for (long i = 0; i < data.n; ++i) idx[static_cast<std::size_t>(i)] = i;

  TrainLog log;
  for (long epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    RngStream shuf = root.child("shuffle").child(static_cast<std::uint64_t>(epoch));
    shuffle_indices(idx, shuf);

    TermSums sums;
    for (long b = 0; b < nb; ++b) {
      const long start = b * cfg.batch_size;
      for (long s = 0; s < cfg.r; ++s) {
        Tensor Xs = rows_to_tensor(data, idx, start + s * sub, sub);
        Tape tape;
        RngStream rs = root.child("step")
                           .child(static_cast<std::uint64_t>(epoch))
                           .child(static_cast<std::uint64_t>(b))
                           .child(static_cast<std::uint64_t>(s));
        ElboBreakdown bd = elbo_plain(m, Xs, rs, m.variant);
        check_finite(bd, epoch);
        sums.add(bd);
        tape.backward(neg(bd.total));
        clip_grads(vae_params, cfg.clip_norm);
        opt_vae.step(vae_params);
      }
      if (epoch > cfg.burnin) {
        Tensor Xb = rows_to_tensor(data, idx, start, cfg.batch_size);
        Tape tape;
        RngStream rr = root.child("ren")
                           .child(static_cast<std::uint64_t>(epoch))
                           .child(static_cast<std::uint64_t>(b));
        ElboBreakdown bd = dpvae ? elbo_ren_dpvae(m, Xb, rr)
                                 : elbo_ren_vae(m, Xb, rr);
        check_finite(bd, epoch);
        sums.add(bd);
        tape.backward(neg(bd.total));
        clip_grads(ren_params, cfg.clip_norm);
        const auto& qa = bd.q_alpha.concentration.data();
        const auto& qb = bd.q_alpha.rate.data();
        for (long l = 0; l < m.L; ++l)
          m.current_alpha[static_cast<std::size_t>(l)] =
              qa[static_cast<std::size_t>(l)] / qb[static_cast<std::size_t>(l)];
        opt_ren.step(ren_params);
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const auto cnt = static_cast<double>(sums.count);
    rec.total = sums.total / cnt;
    rec.recon = sums.recon / cnt;
    rec.neg_entropy_q_z = sums.ne_qz / cnt;
    rec.neg_entropy_q_alpha = sums.ne_qa / cnt;
    rec.prior_z = sums.pz / cnt;
    rec.prior_alpha = sums.pa / cnt;
    rec.log_sigma_dec = m.decoder.log_sigma_dec.data()[0];
    rec.alpha = m.current_alpha;
    rec.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    if (log_out.is_open()) append_log_line(log_out, rec);
    log.epochs.push_back(std::move(rec));
  }
  return log;
}

TrainLog train(RenModel& m, const DataMatrix& data, const TrainConfig& cfg) {
  Adam opt_vae(cfg.lr_vae), opt_ren(cfg.lr_ren);
  return train(m, data, cfg, opt_vae, opt_ren);
}

}  // namespace ren
