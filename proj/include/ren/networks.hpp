#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ren/distributions.hpp"
#include "ren/flows.hpp"
#include "ren/layers.hpp"

namespace ren {

/// 2-D convolution over row-major {N, C*H*W} tensors with fixed geometry.
struct Conv2d {
  Tensor W;  // {out_c, in_c*k*k}
  Tensor b;  // {out_c}
  long in_c = 0, out_c = 0, k = 0, stride = 0, pad = 0;
  long in_h = 0, in_w = 0, out_h = 0, out_w = 0;

  Tensor apply(const Tensor& x) const;  // {N, in_c*in_h*in_w} -> {N, out_c*out_h*out_w}
  void collect(const std::string& prefix, NamedParams& out) const;
};

Conv2d make_conv(long in_c, long out_c, long k, long stride, long pad,
                 long in_h, long in_w, RngStream& rng);

/// Transposed convolution; output spatial size (in-1)*stride - 2*pad + k.
struct ConvTranspose2d {
  Tensor W;  // {in_c, out_c*k*k}
  Tensor b;  // {out_c}
  long in_c = 0, out_c = 0, k = 0, stride = 0, pad = 0;
  long in_h = 0, in_w = 0, out_h = 0, out_w = 0;

  Tensor apply(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

ConvTranspose2d make_conv_transpose(long in_c, long out_c, long k, long stride,
                                    long pad, long in_h, long in_w,
                                    RngStream& rng);

struct EncoderNet {
  bool conv = false;
  long L = 0;
  Mlp trunk;                   // dense path
  std::vector<Conv2d> convs;   // conv path
  Linear fc;                   // conv path: flattened features -> fc (relu)
  Linear head;                 // -> 2L, split into (mu, log_sigma)

  DiagGaussian apply(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct DecoderNet {
  bool conv = false;
  bool sigmoid_out = false;
  Mlp trunk;                               // dense path (last layer emits D)
  Linear fc1, fc2;                         // conv path
  std::vector<ConvTranspose2d> deconvs;    // conv path
  Tensor log_sigma_dec;                    // learnable scalar, init 0

  Tensor apply(const Tensor& z) const;  // mean of p(x|z)
  void collect(const std::string& prefix, NamedParams& out) const;
};

/// Permutation-invariant set encoder: per-row features of X and Z are
/// concatenated, mean-pooled over the set, and mapped to Gamma parameters.
struct RelevanceEncoder {
  long L = 0;
  Mlp data_net;    // D -> F
  Mlp latent_net;  // L -> F
  Mlp head;        // 2F -> (raw_a, raw_b), softplus(.)+1e-6 applied

  GammaParams apply(const Tensor& X, const Tensor& Z) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct RenModel {
  std::string family;   // toy | mnist | dsprites
  std::string variant;  // vae | dpvae
  long L = 0, D = 0;
  EncoderNet encoder;
  DecoderNet decoder;
  RelevanceEncoder relevance;
  std::optional<FlowStack> flow;

  std::vector<double> current_alpha;  // starts at all ones
  double prior_a = 1e-3, prior_b = 1e-4;
  /// When set (the default), the dpvae prior scales the latent by alpha^(1/2)
  /// before pushing it through the flow toward a standard-normal base; at the
  /// identity flow this is exactly the vae prior N(0, alpha^-1 I). With the
  /// scaling off, alpha drops out of the latent density entirely and the
  /// relevance posterior never specializes, so the dpvae cannot prune.
  bool alpha_scaled_flow = true;

  /// Stable order: encoder, decoder, relevance, flow.
  NamedParams params_all() const;
  /// Encoder + decoder (+ flow): the set updated during every step.
  std::vector<Tensor> vae_phase_params() const;
  /// Everything including the relevance encoder.
  std::vector<Tensor> ren_phase_params() const;
};

struct ModelSpec {
  std::string family = "toy";
  std::string variant = "dpvae";
  long L = 2;
  long D = 0;           // 0 -> family default (toy 2, mnist 784, dsprites 4096)
  int flow_blocks = 0;  // 0 -> family default (toy 4, image 6)
  bool alpha_scaled_flow = true;
};

RenModel build_model(const ModelSpec& spec, RngStream& rng);

DiagGaussian encode(const RenModel& m, const Tensor& x);
Tensor decode(const RenModel& m, const Tensor& z);
/// Set-level Gamma parameters; requires at least two rows.
GammaParams infer_relevance(const RenModel& m, const Tensor& X,
                            const Tensor& Z);

}  // namespace ren
