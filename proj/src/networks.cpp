#include "ren/networks.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace ren {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

Tensor apply_act(const Tensor& h, Act a) {
  return a == Act::kRelu ? relu(h) : tanh(h);
}

// Geometry of a stride/pad convolution from {C,H,W} to {_,out_h,out_w}.
struct ConvGeom {
  long C, H, W, k, s, p, out_h, out_w;
  long patch() const { return C * k * k; }
  long cells() const { return out_h * out_w; }
};

void im2col(const ConvGeom& g, const double* img, double* col) {
  for (long c = 0; c < g.C; ++c) {
    for (long di = 0; di < g.k; ++di) {
      for (long dj = 0; dj < g.k; ++dj) {
        double* row = col + ((c * g.k + di) * g.k + dj) * g.cells();
        for (long oh = 0; oh < g.out_h; ++oh) {
          const long ih = oh * g.s + di - g.p;
          for (long ow = 0; ow < g.out_w; ++ow) {
            const long iw = ow * g.s + dj - g.p;
            row[oh * g.out_w + ow] =
                (ih >= 0 && ih < g.H && iw >= 0 && iw < g.W)
                    ? img[(c * g.H + ih) * g.W + iw]
                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeom& g, const double* col, double* img) {
  for (long c = 0; c < g.C; ++c) {
    for (long di = 0; di < g.k; ++di) {
      for (long dj = 0; dj < g.k; ++dj) {
        const double* row = col + ((c * g.k + di) * g.k + dj) * g.cells();
        for (long oh = 0; oh < g.out_h; ++oh) {
          const long ih = oh * g.s + di - g.p;
          if (ih < 0 || ih >= g.H) continue;
          for (long ow = 0; ow < g.out_w; ++ow) {
            const long iw = ow * g.s + dj - g.p;
            if (iw < 0 || iw >= g.W) continue;
            img[(c * g.H + ih) * g.W + iw] += row[oh * g.out_w + ow];
          }
        }
      }
    }
  }
}

std::vector<double> kaiming_uniform(long fan_in, long n, RngStream& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = bound * (2.0 * rng.uniform() - 1.0);
  return v;
}

}  // namespace

// ---- Linear / Mlp -----------------------------------------------------------

Tensor Linear::apply(const Tensor& x) const { return add(matmul(x, W), b); }

void Linear::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".W", W);
  out.emplace_back(prefix + ".b", b);
}

Linear make_linear(long in, long out, RngStream& rng) {
  Linear l;
  l.W = Tensor::param({in, out}, kaiming_uniform(in, in * out, rng));
  l.b = Tensor::param({out},
                      std::vector<double>(static_cast<std::size_t>(out), 0.0));
  return l;
}

Tensor Mlp::apply(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].apply(h);
    if (i + 1 < layers.size() || act_final) h = apply_act(h, act);
  }
  return h;
}

void Mlp::collect(const std::string& prefix, NamedParams& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    layers[i].collect(prefix + ".l" + std::to_string(i), out);
}

Mlp make_mlp(const std::vector<long>& widths, Act act, RngStream& rng,
             bool act_final) {
  if (widths.size() < 2) throw std::invalid_argument("make_mlp: need >= 2 widths");
  Mlp m;
  m.act = act;
  m.act_final = act_final;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    RngStream lr = rng.child(static_cast<std::uint64_t>(i));
    m.layers.push_back(make_linear(widths[i], widths[i + 1], lr));
  }
  return m;
}

// ---- Conv2d -----------------------------------------------------------------

Tensor Conv2d::apply(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != in_c * in_h * in_w)
    throw std::invalid_argument("Conv2d: input " + shape_str(x.shape()) +
                                " does not match geometry " +
                                std::to_string(in_c * in_h * in_w));
  const long n = x.shape()[0];
  const ConvGeom g{in_c, in_h, in_w, k, stride, pad, out_h, out_w};
  const long patch = g.patch(), cells = g.cells();
  std::vector<double> out(static_cast<std::size_t>(n * out_c * cells));
  std::vector<double> col(static_cast<std::size_t>(patch * cells));
  CMapMat wm(W.data().data(), out_c, patch);
  for (long i = 0; i < n; ++i) {
    im2col(g, x.data().data() + i * in_c * in_h * in_w, col.data());
    CMapMat cm(col.data(), patch, cells);
    MapMat om(out.data() + i * out_c * cells, out_c, cells);
    om.noalias() = wm * cm;
    for (long oc = 0; oc < out_c; ++oc)
      om.row(oc).array() += b.data()[static_cast<std::size_t>(oc)];
  }
  const long oc_total = out_c * cells;
  return custom_op(
      {n, oc_total}, std::move(out), {x, W, b},
      [g, n, this_out_c = out_c](const Tensor& res, std::vector<Tensor>& ins) {
        const long patch = g.patch(), cells = g.cells();
        const long in_len = g.C * g.H * g.W;
        std::vector<double> col(static_cast<std::size_t>(patch * cells));
        std::vector<double> gcol(static_cast<std::size_t>(patch * cells));
        Tensor x = ins[0], W = ins[1], b = ins[2];
        CMapMat wm(W.data().data(), this_out_c, patch);
        for (long i = 0; i < n; ++i) {
          CMapMat gy(res.grad().data() + i * this_out_c * cells, this_out_c,
                     cells);
          if (W.needs_grad() || x.needs_grad())
            im2col(g, x.data().data() + i * in_len, col.data());
          if (W.needs_grad()) {
            CMapMat cm(col.data(), patch, cells);
            MapMat(W.node()->grad.data(), this_out_c, patch).noalias() +=
                gy * cm.transpose();
          }
          if (b.needs_grad()) {
            for (long oc = 0; oc < this_out_c; ++oc)
              b.accum_grad(oc, gy.row(oc).sum());
          }
          if (x.needs_grad()) {
            MapMat gc(gcol.data(), patch, cells);
            gc.noalias() = wm.transpose() * gy;
            col2im_add(g, gcol.data(), x.node()->grad.data() + i * in_len);
          }
        }
      });
}

void Conv2d::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".W", W);
  out.emplace_back(prefix + ".b", b);
}

Conv2d make_conv(long in_c, long out_c, long k, long stride, long pad,
                 long in_h, long in_w, RngStream& rng) {
  Conv2d c;
  c.in_c = in_c;
  c.out_c = out_c;
  c.k = k;
  c.stride = stride;
  c.pad = pad;
  c.in_h = in_h;
  c.in_w = in_w;
  c.out_h = (in_h + 2 * pad - k) / stride + 1;
  c.out_w = (in_w + 2 * pad - k) / stride + 1;
  const long fan_in = in_c * k * k;
  c.W = Tensor::param({out_c, fan_in},
                      kaiming_uniform(fan_in, out_c * fan_in, rng));
  c.b = Tensor::param(
      {out_c}, std::vector<double>(static_cast<std::size_t>(out_c), 0.0));
  return c;
}

// ---- ConvTranspose2d --------------------------------------------------------

Tensor ConvTranspose2d::apply(const Tensor& x) const {
  if (x.rank() != 2 || x.shape()[1] != in_c * in_h * in_w)
    throw std::invalid_argument("ConvTranspose2d: input " +
                                shape_str(x.shape()) +
                                " does not match geometry " +
                                std::to_string(in_c * in_h * in_w));
  const long n = x.shape()[0];
  // Geometry of the matching forward conv from the *output* image back to
  // the input grid; col2im over it realizes the transposed conv.
  const ConvGeom g{out_c, out_h, out_w, k, stride, pad, in_h, in_w};
  const long patch = g.patch(), cells = g.cells();
  const long out_len = out_c * out_h * out_w;
  std::vector<double> out(static_cast<std::size_t>(n * out_len), 0.0);
  std::vector<double> col(static_cast<std::size_t>(patch * cells));
  CMapMat wm(W.data().data(), in_c, patch);
  for (long i = 0; i < n; ++i) {
    CMapMat xm(x.data().data() + i * in_c * cells, in_c, cells);
    MapMat cm(col.data(), patch, cells);
    cm.noalias() = wm.transpose() * xm;
    col2im_add(g, col.data(), out.data() + i * out_len);
    for (long oc = 0; oc < out_c; ++oc) {
      double* img = out.data() + i * out_len + oc * out_h * out_w;
      for (long t = 0; t < out_h * out_w; ++t)
        img[t] += b.data()[static_cast<std::size_t>(oc)];
    }
  }
  return custom_op(
      {n, out_len}, std::move(out), {x, W, b},
      [g, n, this_in_c = in_c](const Tensor& res, std::vector<Tensor>& ins) {
        const long patch = g.patch(), cells = g.cells();
        const long out_len = g.C * g.H * g.W;
        std::vector<double> gcol(static_cast<std::size_t>(patch * cells));
        Tensor x = ins[0], W = ins[1], b = ins[2];
        CMapMat wm(W.data().data(), this_in_c, patch);
        for (long i = 0; i < n; ++i) {
          const double* gy = res.grad().data() + i * out_len;
          im2col(g, gy, gcol.data());
          CMapMat gc(gcol.data(), patch, cells);
          if (x.needs_grad()) {
            MapMat(x.node()->grad.data() + i * this_in_c * cells, this_in_c,
                   cells)
                .noalias() += wm * gc;
          }
          if (W.needs_grad()) {
            CMapMat xm(x.data().data() + i * this_in_c * cells, this_in_c,
                       cells);
            MapMat(W.node()->grad.data(), this_in_c, patch).noalias() +=
                xm * gc.transpose();
          }
          if (b.needs_grad()) {
            for (long oc = 0; oc < g.C; ++oc) {
              double acc = 0.0;
              for (long t = 0; t < g.H * g.W; ++t)
                acc += gy[oc * g.H * g.W + t];
              b.accum_grad(oc, acc);
            }
          }
        }
      });
}

void ConvTranspose2d::collect(const std::string& prefix,
                              NamedParams& out) const {
  out.emplace_back(prefix + ".W", W);
  out.emplace_back(prefix + ".b", b);
}

ConvTranspose2d make_conv_transpose(long in_c, long out_c, long k, long stride,
                                    long pad, long in_h, long in_w,
                                    RngStream& rng) {
  ConvTranspose2d c;
  c.in_c = in_c;
  c.out_c = out_c;
  c.k = k;
  c.stride = stride;
  c.pad = pad;
  c.in_h = in_h;
  c.in_w = in_w;
  c.out_h = (in_h - 1) * stride - 2 * pad + k;
  c.out_w = (in_w - 1) * stride - 2 * pad + k;
  const long cols = out_c * k * k;
  c.W = Tensor::param({in_c, cols}, kaiming_uniform(in_c * k * k, in_c * cols,
                                                    rng));
  c.b = Tensor::param(
      {out_c}, std::vector<double>(static_cast<std::size_t>(out_c), 0.0));
  return c;
}

// ---- Encoder / Decoder / Relevance -----------------------------------------

DiagGaussian EncoderNet::apply(const Tensor& x) const {
  Tensor h = x;
  if (conv) {
    for (const Conv2d& c : convs) h = relu(c.apply(h));
    h = relu(fc.apply(h));
  } else {
    h = trunk.apply(h);
  }
  Tensor both = head.apply(h);
  return DiagGaussian{slice(both, 1, 0, L), slice(both, 1, L, 2 * L)};
}

void EncoderNet::collect(const std::string& prefix, NamedParams& out) const {
  if (conv) {
    for (std::size_t i = 0; i < convs.size(); ++i)
      convs[i].collect(prefix + ".conv" + std::to_string(i), out);
    fc.collect(prefix + ".fc", out);
  } else {
    trunk.collect(prefix + ".trunk", out);
  }
  head.collect(prefix + ".head", out);
}

Tensor DecoderNet::apply(const Tensor& z) const {
  Tensor h = z;
  if (conv) {
    h = relu(fc1.apply(h));
    h = relu(fc2.apply(h));
    for (std::size_t i = 0; i < deconvs.size(); ++i) {
      h = deconvs[i].apply(h);
      if (i + 1 < deconvs.size()) h = relu(h);
    }
  } else {
    h = trunk.apply(h);
  }
  return sigmoid_out ? sigmoid(h) : h;
}

void DecoderNet::collect(const std::string& prefix, NamedParams& out) const {
  if (conv) {
    fc1.collect(prefix + ".fc1", out);
    fc2.collect(prefix + ".fc2", out);
    for (std::size_t i = 0; i < deconvs.size(); ++i)
      deconvs[i].collect(prefix + ".deconv" + std::to_string(i), out);
  } else {
    trunk.collect(prefix + ".trunk", out);
  }
  out.emplace_back(prefix + ".log_sigma_dec", log_sigma_dec);
}

GammaParams RelevanceEncoder::apply(const Tensor& X, const Tensor& Z) const {
  if (X.rank() != 2 || Z.rank() != 2 || X.shape()[0] != Z.shape()[0])
    throw std::invalid_argument("RelevanceEncoder: set shapes " +
                                shape_str(X.shape()) + " and " +
                                shape_str(Z.shape()) + " do not align");
  if (X.shape()[0] < 2)
    throw std::invalid_argument(
        "RelevanceEncoder: relevance needs at least 2 samples, got " +
        std::to_string(X.shape()[0]));
  Tensor fx = data_net.apply(X);
  Tensor fz = latent_net.apply(Z);
  Tensor pooled = mean(concat({fx, fz}, 1), 0);
  Tensor raw = head.apply(reshape(pooled, {1, pooled.numel()}));
  Tensor a = reshape(softplus(slice(raw, 1, 0, L)), {L}) + 1e-6;
  Tensor b = reshape(softplus(slice(raw, 1, L, 2 * L)), {L}) + 1e-6;
  return GammaParams{a, b};
}

void RelevanceEncoder::collect(const std::string& prefix,
                               NamedParams& out) const {
  data_net.collect(prefix + ".data", out);
  latent_net.collect(prefix + ".latent", out);
  head.collect(prefix + ".head", out);
}

// ---- RenModel ---------------------------------------------------------------

NamedParams RenModel::params_all() const {
  NamedParams out;
  encoder.collect("encoder", out);
  decoder.collect("decoder", out);
  relevance.collect("relevance", out);
  if (flow) flow->collect("flow", out);
  return out;
}

std::vector<Tensor> RenModel::vae_phase_params() const {
  NamedParams named;
  encoder.collect("encoder", named);
  decoder.collect("decoder", named);
  if (flow) flow->collect("flow", named);
  std::vector<Tensor> out;
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

std::vector<Tensor> RenModel::ren_phase_params() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : params_all()) out.push_back(t);
  return out;
}

RenModel build_model(const ModelSpec& spec, RngStream& rng) {
  RenModel m;
  m.family = spec.family;
  m.variant = spec.variant;
  m.L = spec.L;
  m.alpha_scaled_flow = spec.alpha_scaled_flow;
  if (spec.variant != "vae" && spec.variant != "dpvae")
    throw std::invalid_argument("build_model: unknown variant " + spec.variant);
  if (m.L < 1) throw std::invalid_argument("build_model: latent size must be >= 1");

  RngStream re = rng.child("encoder");
  RngStream rd = rng.child("decoder");
  RngStream rr = rng.child("relevance");

  if (spec.family == "toy") {
    m.D = spec.D > 0 ? spec.D : 2;
    RngStream rt = re.child("trunk"), rh = re.child("head");
    m.encoder.trunk = make_mlp({m.D, 64, 64}, Act::kRelu, rt, true);
    m.encoder.head = make_linear(64, 2 * m.L, rh);
    RngStream dt = rd.child("trunk");
    m.decoder.trunk = make_mlp({m.L, 64, 64, m.D}, Act::kRelu, dt);
  } else if (spec.family == "mnist") {
    m.D = spec.D > 0 ? spec.D : 784;
    RngStream rt = re.child("trunk"), rh = re.child("head");
    m.encoder.trunk = make_mlp({m.D, 512, 256}, Act::kRelu, rt, true);
    m.encoder.head = make_linear(256, 2 * m.L, rh);
    RngStream dt = rd.child("trunk");
    m.decoder.trunk = make_mlp({m.L, 256, 512, m.D}, Act::kRelu, dt);
    m.decoder.sigmoid_out = true;
  } else if (spec.family == "dsprites") {
    m.D = spec.D > 0 ? spec.D : 4096;
    if (m.D != 4096)
      throw std::invalid_argument("build_model: dsprites expects 64x64 inputs");
    m.encoder.conv = true;
    long h = 64, w = 64;
    const long chans[5] = {1, 32, 32, 64, 64};
    for (int i = 0; i < 4; ++i) {
      RngStream rc = re.child("conv").child(static_cast<std::uint64_t>(i));
      m.encoder.convs.push_back(
          make_conv(chans[i], chans[i + 1], 4, 2, 1, h, w, rc));
      h /= 2;
      w /= 2;
    }
    RngStream rf = re.child("fc"), rh = re.child("head");
    m.encoder.fc = make_linear(64 * 4 * 4, 256, rf);
    m.encoder.head = make_linear(256, 2 * m.L, rh);

    m.decoder.conv = true;
    RngStream r1 = rd.child("fc1"), r2 = rd.child("fc2");
    m.decoder.fc1 = make_linear(m.L, 256, r1);
    m.decoder.fc2 = make_linear(256, 64 * 4 * 4, r2);
    const long dchans[5] = {64, 64, 32, 32, 1};
    long dh = 4, dw = 4;
    for (int i = 0; i < 4; ++i) {
      RngStream rc = rd.child("deconv").child(static_cast<std::uint64_t>(i));
      m.decoder.deconvs.push_back(
          make_conv_transpose(dchans[i], dchans[i + 1], 4, 2, 1, dh, dw, rc));
      dh *= 2;
      dw *= 2;
    }
    m.decoder.sigmoid_out = true;
  } else {
    throw std::invalid_argument("build_model: unknown family " + spec.family);
  }
  m.encoder.L = m.L;
  m.decoder.log_sigma_dec = Tensor::param({}, {0.0});

  m.relevance.L = m.L;
  RngStream ra = rr.child("data"), rz = rr.child("latent"),
            rh2 = rr.child("head");
  m.relevance.data_net = make_mlp({m.D, 128, 128, 128}, Act::kRelu, ra);
  m.relevance.latent_net = make_mlp({m.L, 128, 128, 128}, Act::kRelu, rz);
  m.relevance.head = make_mlp({256, 128, 2 * m.L}, Act::kRelu, rh2);

  if (spec.variant == "dpvae") {
    const int blocks =
        spec.flow_blocks > 0 ? spec.flow_blocks : (spec.family == "toy" ? 4 : 6);
    RngStream rfl = rng.child("flow");
    m.flow = make_flow(m.L, blocks, rfl);
    // Identity-start flow: zero the last layer of every coupling net so the
    // stack begins as z0 = z. Random finals compound exp(s) across blocks and
    // blow the prior term up at image scale before training can react.
    for (CouplingBlock& blk : m.flow->blocks)
      for (Mlp* net : {&blk.scale_net, &blk.translate_net}) {
        Linear& last = net->layers.back();
        std::fill(last.W.data().begin(), last.W.data().end(), 0.0);
        std::fill(last.b.data().begin(), last.b.data().end(), 0.0);
      }
  }
  m.current_alpha.assign(static_cast<std::size_t>(m.L), 1.0);
  return m;
}

DiagGaussian encode(const RenModel& m, const Tensor& x) {
  if (x.rank() != 2 || x.shape()[1] != m.D)
    throw std::invalid_argument("encode: input " + shape_str(x.shape()) +
                                " does not match data size " +
                                std::to_string(m.D));
  return m.encoder.apply(x);
}

Tensor decode(const RenModel& m, const Tensor& z) {
  if (z.rank() != 2 || z.shape()[1] != m.L)
    throw std::invalid_argument("decode: input " + shape_str(z.shape()) +
                                " does not match latent size " +
                                std::to_string(m.L));
  return m.decoder.apply(z);
}

GammaParams infer_relevance(const RenModel& m, const Tensor& X,
                            const Tensor& Z) {
  if (X.rank() != 2 || X.shape()[1] != m.D)
    throw std::invalid_argument("infer_relevance: data set " +
                                shape_str(X.shape()) +
                                " does not match data size " +
                                std::to_string(m.D));
  if (Z.rank() != 2 || Z.shape()[1] != m.L)
    throw std::invalid_argument("infer_relevance: latent set " +
                                shape_str(Z.shape()) +
                                " does not match latent size " +
                                std::to_string(m.L));
  return m.relevance.apply(X, Z);
}

}  // namespace ren
