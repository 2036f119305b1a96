#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ren/metrics.hpp"

using namespace ren;

namespace {

RenModel toy_model(std::uint64_t seed, long L = 2,
                   const std::string& variant = "dpvae", long D = 0) {
  ModelSpec spec;
  spec.family = "toy";
  spec.variant = variant;
  spec.L = L;
  spec.D = D;
  RngStream rng(seed);
  return build_model(spec, rng);
}

DataMatrix gaussian_cloud(long n, long d, double mu, std::uint64_t seed) {
  RngStream rng(seed);
  DataMatrix m;
  m.n = n;
  m.d = d;
  m.v.resize(static_cast<std::size_t>(n * d));
  for (auto& v : m.v) v = mu + rng.normal();
  return m;
}

// Brute-force ranking: repeatedly extract the maximum variance, then count
// how many leading shares reach 0.95.
long brute_l_star(std::vector<double> alpha) {
  std::vector<double> vars;
  for (double a : alpha) vars.push_back(1.0 / a);
  const double total = std::accumulate(vars.begin(), vars.end(), 0.0);
  double cum = 0.0;
  long k = 0;
  while (!vars.empty()) {
    auto it = std::max_element(vars.begin(), vars.end());
    cum += *it / total;
    vars.erase(it);
    ++k;
    if (cum >= 0.95) return k;
  }
  return k;
}

// E|X| for X ~ N(mu, sigma^2).
double folded_mean(double mu, double sigma) {
  const double phi = std::exp(-mu * mu / (2.0 * sigma * sigma)) /
                     std::sqrt(2.0 * M_PI);
  const double cdf_neg = 0.5 * std::erfc(mu / (sigma * std::sqrt(2.0)));
  return 2.0 * sigma * phi + mu * (1.0 - 2.0 * cdf_neg);
}

}  // namespace

TEST_CASE("relevance ranking orders variances and finds the 95% cut") {
  SUBCASE("dominant dimension") {
    RelevanceReport rep = relevance_report({1.0, 1e6});
    CHECK(rep.order == std::vector<long>{0, 1});
    CHECK(rep.explained_ratio[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(rep.explained_ratio[1] == doctest::Approx(1e-6).epsilon(1e-3));
    CHECK(rep.l_star == 1);
  }
  SUBCASE("uniform relevance needs every dimension") {
    RelevanceReport rep = relevance_report(std::vector<double>(10, 1.0));
    for (double r : rep.explained_ratio)
      CHECK(r == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(rep.l_star == 10);
  }
  SUBCASE("hand-worked three-dimensional case with a tie") {
    RelevanceReport rep = relevance_report({1.0, 4.0, 4.0});
    CHECK(rep.variances == std::vector<double>{1.0, 0.25, 0.25});
    CHECK(rep.order == std::vector<long>{0, 1, 2});
    CHECK(rep.explained_ratio[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(rep.explained_ratio[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(rep.cumulative[1] == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(rep.cumulative[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.l_star == 3);
  }
  SUBCASE("ties keep original index order") {
    RelevanceReport rep = relevance_report({2.0, 0.5, 2.0, 0.5});
    CHECK(rep.order == std::vector<long>{1, 3, 0, 2});
  }
  SUBCASE("matches a brute-force recomputation") {
    RngStream rng(64);
    for (int rep_i = 0; rep_i < 20; ++rep_i) {
      const long L = 2 + static_cast<long>(rng.uniform() * 7.0);
      std::vector<double> alpha;
      for (long l = 0; l < L; ++l)
        alpha.push_back(std::exp(3.0 * rng.normal()));
      RelevanceReport rep = relevance_report(alpha);
      CHECK(rep.l_star == brute_l_star(alpha));
      CHECK(std::is_sorted(rep.variances.rbegin(), rep.variances.rend()));
      CHECK(rep.cumulative.back() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("permutations keep the sorted view and l_star") {
    std::vector<double> alpha = {0.2, 5.0, 1.0, 40.0};
    RelevanceReport a = relevance_report(alpha);
    std::vector<double> perm = {40.0, 0.2, 1.0, 5.0};
    RelevanceReport b = relevance_report(perm);
    CHECK(a.variances == b.variances);
    CHECK(a.explained_ratio == b.explained_ratio);
    CHECK(a.l_star == b.l_star);
  }
  SUBCASE("rejects non-positive input") {
    CHECK_THROWS_AS(relevance_report({1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(relevance_report({-1.0}), std::invalid_argument);
    CHECK_THROWS_AS(report_from_variances({}), std::invalid_argument);
  }
  SUBCASE("external variances use the same ranking") {
    RelevanceReport rep = report_from_variances({1.0, 0.25, 0.25});
    CHECK(rep.l_star == 3);
    CHECK(rep.alpha.empty());
  }
}

TEST_CASE("reconstruction error uses the encoder mean") {
  SUBCASE("crafted identity autoencoder scores zero") {
    RenModel m = toy_model(50, 1, "vae", 1);
    NamedParams named;
    m.encoder.collect("encoder", named);
    m.decoder.collect("decoder", named);
    for (auto& [name, t] : named)
      std::fill(t.data().begin(), t.data().end(), 0.0);
    const auto plant_pair = [](Linear& l0, Linear& l1) {
      l0.W.data()[0] = 1.0;
      l0.W.data()[1] = -1.0;
      l1.W.data()[0 * 64 + 0] = 1.0;
      l1.W.data()[1 * 64 + 1] = 1.0;
    };
    plant_pair(m.encoder.trunk.layers[0], m.encoder.trunk.layers[1]);
    plant_pair(m.decoder.trunk.layers[0], m.decoder.trunk.layers[1]);
    m.encoder.head.W.data()[0 * 2 + 0] = 1.0;
    m.encoder.head.W.data()[1 * 2 + 0] = -1.0;
    m.decoder.trunk.layers[2].W.data()[0] = 1.0;
    m.decoder.trunk.layers[2].W.data()[1] = -1.0;

    DataMatrix X;
    X.n = 4;
    X.d = 1;
    X.v = {0.3, -1.7, 2.4, 0.0};
    CHECK(recon_mse(m, X) == 0.0);
  }
  SUBCASE("zero decoder reproduces the second moment") {
    RenModel m = toy_model(51, 2, "vae");
    NamedParams named;
    m.decoder.collect("decoder", named);
    for (auto& [name, t] : named)
      std::fill(t.data().begin(), t.data().end(), 0.0);
    DataMatrix X = gaussian_cloud(200, 2, 0.5, 3);
    double moment = 0.0;
    for (double v : X.v) moment += v * v;
    moment /= static_cast<double>(X.v.size());
    CHECK(recon_mse(m, X) == doctest::Approx(moment).epsilon(1e-12));
  }
  SUBCASE("matches an independent reimplementation") {
    RenModel m = toy_model(52, 2, "dpvae");
    DataMatrix X = gaussian_cloud(64, 2, 0.0, 4);
    Tape tape;
    Tensor mu = encode(m, to_tensor(X)).mu;
    Tensor rec = decode(m, mu);
    double acc = 0.0;
    for (std::size_t i = 0; i < X.v.size(); ++i) {
      const double d = X.v[i] - rec.data()[i];
      acc += d * d;
    }
    acc /= static_cast<double>(X.v.size());
    CHECK(recon_mse(m, X) == doctest::Approx(acc).epsilon(1e-12));
  }
  SUBCASE("dimension mismatch is rejected") {
    RenModel m = toy_model(53, 2, "vae");
    DataMatrix X = gaussian_cloud(8, 3, 0.0, 5);
    CHECK_THROWS_AS(recon_mse(m, X), std::invalid_argument);
  }
}

TEST_CASE("energy distance behaves like a metric on samples") {
  DataMatrix A = gaussian_cloud(400, 2, 0.0, 10);
  DataMatrix B = gaussian_cloud(300, 2, 1.0, 11);

  SUBCASE("identical sets score exactly zero in the biased form") {
    CHECK(energy_distance(A, A) == 0.0);
    // The n*(n-1) within-set divisor overshoots the n^2 cross divisor, so the
    // unbiased form is slightly negative on identical sets.
    const double u = energy_distance(A, A, true);
    CHECK(u < 0.0);
    CHECK(u > -0.02);
  }
  SUBCASE("symmetry is exact") {
    CHECK(energy_distance(A, B) == energy_distance(B, A));
  }
  SUBCASE("two unit gaussians are close") {
    DataMatrix G1 = gaussian_cloud(10000, 2, 0.0, 12);
    DataMatrix G2 = gaussian_cloud(10000, 2, 0.0, 13);
    CHECK(energy_distance(G1, G2) <= 0.02);
    CHECK(energy_distance(G1, G2) >= 0.0);
  }
  SUBCASE("separated 1-d gaussians match the closed form within 5%") {
    DataMatrix G1 = gaussian_cloud(10000, 1, 0.0, 14);
    DataMatrix G2 = gaussian_cloud(10000, 1, 3.0, 15);
    const double sqrt2 = std::sqrt(2.0);
    const double analytic =
        2.0 * folded_mean(3.0, sqrt2) - 2.0 * folded_mean(0.0, sqrt2);
    const double got = energy_distance(G1, G2);
    CHECK(std::fabs(got - analytic) < 0.05 * analytic);
  }
  SUBCASE("distance grows with the mean gap") {
    DataMatrix base = gaussian_cloud(10000, 1, 0.0, 16);
    double prev = -1.0;
    for (double mu : {0.0, 1.0, 2.0, 3.0}) {
      DataMatrix other = gaussian_cloud(10000, 1, mu, 17);
      const double d = energy_distance(base, other);
      CHECK(d >= prev);
      prev = d;
    }
  }
  SUBCASE("unbiased and biased forms agree at scale") {
    DataMatrix G1 = gaussian_cloud(2000, 2, 0.0, 18);
    DataMatrix G2 = gaussian_cloud(2000, 2, 0.7, 19);
    CHECK(energy_distance(G1, G2, true) ==
          doctest::Approx(energy_distance(G1, G2)).epsilon(0.02));
  }
  SUBCASE("degenerate inputs are rejected") {
    DataMatrix one = gaussian_cloud(1, 2, 0.0, 20);
    CHECK_THROWS_AS(energy_distance(one, B), std::invalid_argument);
    DataMatrix narrow = gaussian_cloud(10, 1, 0.0, 21);
    CHECK_THROWS_AS(energy_distance(narrow, B), std::invalid_argument);
  }
}

TEST_CASE("generation draws from the model prior and decodes means") {
  SUBCASE("fixed seed reproduces the sample matrix") {
    RenModel m = toy_model(60, 2, "dpvae");
    RngStream r1(5), r2(5), r3(6);
    DataMatrix a = generate(m, 16, r1);
    DataMatrix b = generate(m, 16, r2);
    DataMatrix c = generate(m, 16, r3);
    CHECK(a.v == b.v);
    CHECK(a.v != c.v);
    CHECK(a.n == 16);
    CHECK(a.d == 2);
  }
  SUBCASE("zero samples give an empty matrix") {
    RenModel m = toy_model(61, 2, "vae");
    RngStream rng(1);
    DataMatrix a = generate(m, 0, rng);
    CHECK(a.n == 0);
    CHECK(a.d == 2);
    CHECK(a.v.empty());
  }
  SUBCASE("identity flow collapses both variants to the same law") {
    RenModel mv = toy_model(62, 2, "vae");
    RenModel md = toy_model(62, 2, "dpvae");
    NamedParams named;
    md.flow->collect("flow", named);
    for (auto& [name, t] : named)
      std::fill(t.data().begin(), t.data().end(), 0.0);
    RngStream r1(7), r2(8);
    DataMatrix a = generate(mv, 10000, r1);
    DataMatrix b = generate(md, 10000, r2);
    CHECK(energy_distance(a, b) <= 0.02);
  }
  SUBCASE("latent variance follows the relevance profile") {
    RenModel m = toy_model(63, 2, "vae");
    m.current_alpha = {0.25, 100.0};
    RngStream rng(9);
    GenerateResult g = generate_with_latents(m, 4000, rng);
    double v0 = 0.0, v1 = 0.0;
    for (long i = 0; i < g.z.n; ++i) {
      v0 += g.z.at(i, 0) * g.z.at(i, 0);
      v1 += g.z.at(i, 1) * g.z.at(i, 1);
    }
    v0 /= static_cast<double>(g.z.n);
    v1 /= static_cast<double>(g.z.n);
    // High-relevance axis (small alpha) carries the variance.
    CHECK(v0 > 100.0 * v1);
    CHECK(v0 == doctest::Approx(4.0).epsilon(0.1));
    CHECK(v1 == doctest::Approx(0.01).epsilon(0.1));
  }
  SUBCASE("alpha scaling shrinks the dpvae latents too") {
    RenModel m = toy_model(64, 2, "dpvae", 0);
    m.alpha_scaled_flow = true;
    NamedParams named;
    m.flow->collect("flow", named);
    for (auto& [name, t] : named)
      std::fill(t.data().begin(), t.data().end(), 0.0);
    m.current_alpha = {1.0, 400.0};
    RngStream rng(10);
    GenerateResult g = generate_with_latents(m, 4000, rng);
    double v1 = 0.0;
    for (long i = 0; i < g.z.n; ++i) v1 += g.z.at(i, 1) * g.z.at(i, 1);
    v1 /= static_cast<double>(g.z.n);
    CHECK(v1 == doctest::Approx(1.0 / 400.0).epsilon(0.15));
  }
}
