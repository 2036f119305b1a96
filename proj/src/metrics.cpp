#include "ren/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ren {

RelevanceReport report_from_variances(const std::vector<double>& variances) {
  if (variances.empty())
    throw std::invalid_argument("relevance_report: empty vector");
  for (double v : variances)
    if (!(v > 0.0))
      throw std::invalid_argument(
          "relevance_report: variances must be positive");

  RelevanceReport rep;
  const auto L = static_cast<long>(variances.size());
  rep.order.resize(static_cast<std::size_t>(L));
  std::iota(rep.order.begin(), rep.order.end(), 0L);
  std::stable_sort(rep.order.begin(), rep.order.end(), [&](long a, long b) {
    return variances[static_cast<std::size_t>(a)] >
           variances[static_cast<std::size_t>(b)];
  });
  double total = 0.0;
  for (long l : rep.order) {
    rep.variances.push_back(variances[static_cast<std::size_t>(l)]);
    total += variances[static_cast<std::size_t>(l)];
  }
  double running = 0.0;
  rep.l_star = L;
  bool found = false;
  for (long k = 0; k < L; ++k) {
    const double ratio = rep.variances[static_cast<std::size_t>(k)] / total;
    running += ratio;
    rep.explained_ratio.push_back(ratio);
    rep.cumulative.push_back(running);
    if (!found && running >= 0.95) {
      rep.l_star = k + 1;
      found = true;
    }
  }
  return rep;
}

RelevanceReport relevance_report(const std::vector<double>& alpha) {
  for (double a : alpha)
    if (!(a > 0.0))
      throw std::invalid_argument("relevance_report: alpha must be positive");
  std::vector<double> variances;
  variances.reserve(alpha.size());
  for (double a : alpha) variances.push_back(1.0 / a);
  RelevanceReport rep = report_from_variances(variances);
  rep.alpha = alpha;
  return rep;
}

double recon_mse(const RenModel& m, const DataMatrix& X) {
  if (X.d != m.D)
    throw std::invalid_argument("recon_mse: data dimension " +
                                std::to_string(X.d) + " does not match model " +
                                std::to_string(m.D));
  Tape tape;
  Tensor Xt = to_tensor(X);
  DiagGaussian q = encode(m, Xt);
  Tensor recon = decode(m, q.mu);
  const auto& xr = recon.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < X.v.size(); ++i) {
    const double d = X.v[i] - xr[i];
    acc += d * d;
  }
  return acc / static_cast<double>(X.v.size());
}

namespace {

double mean_pair_dist(const DataMatrix& A, const DataMatrix& B) {
  double acc = 0.0;
  for (long i = 0; i < A.n; ++i)
    for (long j = 0; j < B.n; ++j) {
      double sq = 0.0;
      for (long d = 0; d < A.d; ++d) {
        const double diff = A.at(i, d) - B.at(j, d);
        sq += diff * diff;
      }
      acc += std::sqrt(sq);
    }
  return acc / (static_cast<double>(A.n) * static_cast<double>(B.n));
}

// Full-grid accumulation in the same order as mean_pair_dist(A, A), so the
// V-statistic of identical sets cancels exactly.
double mean_within_dist(const DataMatrix& A, bool unbiased) {
  double acc = 0.0;
  for (long i = 0; i < A.n; ++i)
    for (long j = 0; j < A.n; ++j) {
      double sq = 0.0;
      for (long d = 0; d < A.d; ++d) {
        const double diff = A.at(i, d) - A.at(j, d);
        sq += diff * diff;
      }
      acc += std::sqrt(sq);
    }
  const double n = static_cast<double>(A.n);
  return acc / (unbiased ? n * (n - 1.0) : n * n);
}

}  // namespace

double energy_distance(const DataMatrix& A, const DataMatrix& B,
                       bool unbiased) {
  if (A.n < 2 || B.n < 2)
    throw std::invalid_argument("energy_distance: need at least 2 samples per set");
  if (A.d != B.d)
    throw std::invalid_argument("energy_distance: dimension mismatch " +
                                std::to_string(A.d) + " vs " +
                                std::to_string(B.d));
  // Canonical argument order makes the statistic exactly symmetric.
  const DataMatrix* x = &A;
  const DataMatrix* y = &B;
  if (y->n < x->n ||
      (y->n == x->n && std::lexicographical_compare(y->v.begin(), y->v.end(),
                                                    x->v.begin(), x->v.end())))
    std::swap(x, y);
  return 2.0 * mean_pair_dist(*x, *y) - mean_within_dist(*x, unbiased) -
         mean_within_dist(*y, unbiased);
}

GenerateResult generate_with_latents(const RenModel& m, long n,
                                     RngStream& rng) {
  if (n < 0) throw std::invalid_argument("generate: negative sample count");
  GenerateResult out;
  out.x.n = n;
  out.x.d = m.D;
  out.z.n = n;
  out.z.d = m.L;
  if (n == 0) return out;

  RngStream rz = rng.child("gen_z");
  std::vector<double> zv(static_cast<std::size_t>(n * m.L));
  const bool dpvae = m.variant == "dpvae";
  // vae draws the ARD prior directly; dpvae draws the standard-normal flow
  // base and applies the alpha^(-1/2) scaling after inverting the flow.
  for (long i = 0; i < n; ++i)
    for (long l = 0; l < m.L; ++l) {
      double v = rz.normal();
      if (!dpvae)
        v /= std::sqrt(m.current_alpha[static_cast<std::size_t>(l)]);
      zv[static_cast<std::size_t>(i * m.L + l)] = v;
    }

  Tape tape;
  Tensor z = Tensor::constant({n, m.L}, std::move(zv));
  if (dpvae) {
    z = flow_inverse(z, *m.flow);
    if (m.alpha_scaled_flow) {
      std::vector<double> inv_root(m.current_alpha.size());
      for (std::size_t l = 0; l < inv_root.size(); ++l)
        inv_root[l] = 1.0 / std::sqrt(m.current_alpha[l]);
      z = z * Tensor::constant({m.L}, std::move(inv_root));
    }
  }
  Tensor x = decode(m, z);
  out.z.v = z.data();
  out.x.v = x.data();
  return out;
}

DataMatrix generate(const RenModel& m, long n, RngStream& rng) {
  return generate_with_latents(m, n, rng).x;
}

}  // namespace ren
