#include "ren/flows.hpp"

#include <stdexcept>

#include "ren/distributions.hpp"

namespace ren {

namespace {

void check_dim(const char* op, const Tensor& z, const FlowStack& f) {
  const long L = z.rank() == 2 ? z.shape()[1] : z.numel();
  if (z.rank() < 1 || z.rank() > 2 || L != f.L)
    throw std::invalid_argument(std::string(op) + ": input " +
                                shape_str(z.shape()) +
                                " does not match flow dimension " +
                                std::to_string(f.L));
}

}  // namespace

void FlowStack::collect(const std::string& prefix, NamedParams& out) const {
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const std::string base = prefix + ".block" + std::to_string(k);
    blocks[k].scale_net.collect(base + ".scale", out);
    blocks[k].translate_net.collect(base + ".translate", out);
  }
}

FlowStack make_flow(long L, int blocks, RngStream& rng, long hidden) {
  if (blocks < 2) throw std::invalid_argument("make_flow: need >= 2 blocks");
  FlowStack f;
  f.L = L;
  for (int k = 0; k < blocks; ++k) {
    CouplingBlock blk;
    blk.mask.resize(static_cast<std::size_t>(L));
    for (long l = 0; l < L; ++l)
      blk.mask[static_cast<std::size_t>(l)] =
          ((l + k) % 2 == 0) ? 1.0 : 0.0;
    RngStream r = rng.child("flow_block").child(static_cast<std::uint64_t>(k));
    RngStream rs = r.child("scale");
    RngStream rt = r.child("translate");
    blk.scale_net = make_mlp({L, hidden, hidden, L}, Act::kTanh, rs);
    blk.translate_net = make_mlp({L, hidden, hidden, L}, Act::kTanh, rt);
    f.blocks.push_back(std::move(blk));
  }
  return f;
}

FlowResult flow_forward(const Tensor& z, const FlowStack& f) {
  check_dim("flow_forward", z, f);
  const bool vec = z.rank() == 1;
  Tensor cur = vec ? reshape(z, {1, f.L}) : z;
  const long n = cur.shape()[0];
  Tensor log_det = Tensor::zeros({n});
  for (const CouplingBlock& blk : f.blocks) {
    Tensor m = Tensor::constant({f.L}, blk.mask);
    Tensor inv_m = 1.0 - m;
    Tensor zm = cur * m;
    Tensor s = tanh(blk.scale_net.apply(zm)) * blk.s_max;
    Tensor t = blk.translate_net.apply(zm);
    cur = zm + inv_m * (cur * exp(s) + t);
    log_det = log_det + sum(inv_m * s, 1);
  }
  if (vec)
    return {reshape(cur, {f.L}), reshape(log_det, {})};
  return {cur, log_det};
}

Tensor flow_inverse(const Tensor& z0, const FlowStack& f) {
  check_dim("flow_inverse", z0, f);
  const bool vec = z0.rank() == 1;
  Tensor cur = vec ? reshape(z0, {1, f.L}) : z0;
  for (auto it = f.blocks.rbegin(); it != f.blocks.rend(); ++it) {
    const CouplingBlock& blk = *it;
    Tensor m = Tensor::constant({f.L}, blk.mask);
    Tensor inv_m = 1.0 - m;
    Tensor ym = cur * m;  // masked coordinates pass through unchanged
    Tensor s = tanh(blk.scale_net.apply(ym)) * blk.s_max;
    Tensor t = blk.translate_net.apply(ym);
    cur = ym + inv_m * ((cur - t) * exp(neg(s)));
  }
  return vec ? reshape(cur, {f.L}) : cur;
}

Tensor flow_prior_log_prob(const Tensor& z, const FlowStack& f) {
  FlowResult r = flow_forward(z, f);
  Tensor ones = Tensor::full({f.L}, 1.0);
  return latent_prior_log_prob(r.z0, ones) + r.log_det;
}

Tensor flow_prior_log_prob(const Tensor& z, const FlowStack& f,
                           const Tensor& alpha) {
  // Density of z when alpha^(1/2) * z flows to a standard-normal base: the
  // diagonal scaling contributes 0.5 * sum(log alpha) per row, and the whole
  // construction reduces to N(0, alpha^-1 I) at the identity flow.
  Tensor root = exp(0.5 * log(alpha));
  FlowResult r = flow_forward(z * root, f);
  Tensor ones = Tensor::full({f.L}, 1.0);
  Tensor scale_ld = 0.5 * sum(log(alpha));
  return latent_prior_log_prob(r.z0, ones) + r.log_det + scale_ld;
}

}  // namespace ren
