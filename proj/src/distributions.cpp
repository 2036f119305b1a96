#include "ren/distributions.hpp"

#include <cmath>
#include <stdexcept>

#include "ren/special.hpp"

namespace ren {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

Tensor sum_last(const Tensor& t) {
  if (t.rank() == 2) return sum(t, 1);
  return sum(t);
}

}  // namespace

Tensor gaussian_log_prob(const Tensor& x, const DiagGaussian& d) {
  if (x.shape() != d.mu.shape())
    throw std::invalid_argument("gaussian_log_prob: x shape " +
                                shape_str(x.shape()) + " does not match mu " +
                                shape_str(d.mu.shape()));
  Tensor z = (x - d.mu) * exp(neg(d.log_sigma));
  Tensor terms = neg(d.log_sigma) - kHalfLogTwoPi - 0.5 * square(z);
  return sum_last(terms);
}

Tensor gaussian_rsample(const DiagGaussian& d, RngStream& rng) {
  std::vector<double> eps(static_cast<std::size_t>(d.mu.numel()));
  for (auto& e : eps) e = rng.normal();
  Tensor eps_t = Tensor::constant(d.mu.shape(), std::move(eps));
  return d.mu + exp(d.log_sigma) * eps_t;
}

Tensor gaussian_entropy(const DiagGaussian& d) {
  Tensor terms = d.log_sigma + (kHalfLogTwoPi + 0.5);
  return sum_last(terms);
}

Tensor gamma_log_prob(const Tensor& alpha, const GammaParams& g) {
  Tensor a = g.concentration, b = g.rate;
  Tensor terms =
      a * log(b) - lgamma(a) + (a - 1.0) * log(alpha) - b * alpha;
  return sum_last(terms);
}

Tensor gamma_implicit_rsample(const GammaParams& g, RngStream& rng) {
  const Tensor& a = g.concentration;
  const Tensor& b = g.rate;
  if (a.shape() != b.shape())
    throw std::invalid_argument(
        "gamma_implicit_rsample: concentration shape " +
        shape_str(a.shape()) + " does not match rate " +
        shape_str(b.shape()));
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<double> alpha(av.size());
  for (std::size_t i = 0; i < av.size(); ++i)
    alpha[i] = rng.gamma(av[i], bv[i]);
  return custom_op(
      a.shape(), std::move(alpha), {a, b},
      [](const Tensor& out, std::vector<Tensor>& ins) {
        const auto& av = ins[0].data();
        const auto& bv = ins[1].data();
        const auto& sample = out.data();
        const auto& grad = out.grad();
        for (std::size_t i = 0; i < sample.size(); ++i) {
          const double ai = av[i], bi = bv[i], x = sample[i];
          // dF/dalpha is the density; clamp so tail draws cannot divide by 0.
          const double dF_dalpha =
              std::max(gamma_pdf(ai, bi, x), 1e-300);
          const double h = 1e-4 * std::max(1.0, ai);
          // One-sided difference when a - h would leave the domain.
          const double dF_da =
              ai > h ? (reg_lower_inc_gamma(ai + h, bi * x) -
                        reg_lower_inc_gamma(ai - h, bi * x)) /
                           (2.0 * h)
                     : (reg_lower_inc_gamma(ai + h, bi * x) -
                        reg_lower_inc_gamma(ai, bi * x)) /
                           h;
          ins[0].accum_grad(static_cast<long>(i),
                            grad[i] * (-dF_da / dF_dalpha));
          ins[1].accum_grad(static_cast<long>(i), grad[i] * (-x / bi));
        }
      });
}

Tensor latent_prior_log_prob(const Tensor& z, const Tensor& alpha) {
  Tensor terms =
      0.5 * log(alpha) - kHalfLogTwoPi - 0.5 * (alpha * square(z));
  return sum_last(terms);
}

}  // namespace ren
