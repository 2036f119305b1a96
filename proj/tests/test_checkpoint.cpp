#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "checkutil.hpp"
#include "ren/checkpoint.hpp"

using namespace ren;

namespace {

RenModel fresh_model(std::uint64_t seed) {
  ModelSpec spec;
  spec.family = "toy";
  spec.variant = "dpvae";
  spec.L = 2;
  RngStream rng(seed);
  return build_model(spec, rng);
}

// A few optimizer steps so moments and alpha are nontrivial.
void churn(RenModel& m, Adam& vae_opt, Adam& ren_opt) {
  RngStream rng(77);
  Tensor x = Tensor::constant({4, 2}, testutil::random_values(rng, 8, -1, 1));
  for (int i = 0; i < 3; ++i) {
    Tape tape;
    DiagGaussian q = encode(m, x);
    RngStream r = rng.child("z").child(std::uint64_t(i));
    Tensor z = gaussian_rsample(q, r);
    Tensor loss = mean(square(decode(m, z) - x));
    tape.backward(loss);
    vae_opt.step(m.vae_phase_params());
  }
  {
    Tape tape;
    DiagGaussian q = encode(m, x);
    RngStream r = rng.child("z2");
    Tensor z = gaussian_rsample(q, r);
    GammaParams g = infer_relevance(m, x, z);
    Tensor loss = mean(square(decode(m, z) - x)) + sum(g.concentration);
    tape.backward(loss);
    ren_opt.step(m.ren_phase_params());
  }
  m.current_alpha = {0.25, 9.5};
}

}  // namespace

TEST_CASE("round trip is bit exact") {
  const std::string path = "/tmp/ren_ckpt_test.bin";
  RenModel a = fresh_model(1);
  Adam va(1e-3), ra(1e-5);
  churn(a, va, ra);
  save_checkpoint(path, a, "family=toy\nseed=42\n", va, ra);

  RenModel b = fresh_model(2);  // different init, will be overwritten
  Adam vb(1e-3), rb(1e-5);
  const std::string echo = load_checkpoint(path, b, vb, rb);
  CHECK(echo == "family=toy\nseed=42\n");

  const NamedParams pa = a.params_all();
  const NamedParams pb = b.params_all();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    const auto& da = pa[i].second.data();
    const auto& db = pb[i].second.data();
    REQUIRE(da.size() == db.size());
    for (std::size_t j = 0; j < da.size(); ++j) CHECK(da[j] == db[j]);
  }
  CHECK(a.current_alpha == b.current_alpha);
  CHECK(va.step_count() == vb.step_count());
  CHECK(va.m() == vb.m());
  CHECK(va.v() == vb.v());
  CHECK(ra.m() == rb.m());

  // Saving the loaded model reproduces the file byte for byte.
  const std::string path2 = "/tmp/ren_ckpt_test2.bin";
  save_checkpoint(path2, b, echo, vb, rb);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string c1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string c2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(c1 == c2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("corrupt and mismatched files are rejected") {
  const std::string path = "/tmp/ren_ckpt_bad.bin";
  RenModel a = fresh_model(1);
  Adam va(1e-3), ra(1e-5);
  save_checkpoint(path, a, "", va, ra);

  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("WRONGMAG", 8);
  }
  RenModel b = fresh_model(1);
  Adam vb(1e-3), rb(1e-5);
  CHECK_THROWS_WITH_AS(load_checkpoint(path, b, vb, rb),
                       doctest::Contains("bad magic"), std::runtime_error);

  save_checkpoint(path, a, "", va, ra);
  // Truncate.
  {
    std::ifstream in(path, std::ios::binary);
    std::string all((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(all.data(), static_cast<std::streamsize>(all.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(path, b, vb, rb), std::runtime_error);

  // Architecture mismatch.
  save_checkpoint(path, a, "", va, ra);
  ModelSpec spec;
  spec.family = "toy";
  spec.variant = "vae";
  spec.L = 2;
  RngStream rng(9);
  RenModel c = build_model(spec, rng);
  CHECK_THROWS_AS(load_checkpoint(path, c, vb, rb), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint("/tmp/ren_no_such_file.bin", b, vb, rb),
                  std::runtime_error);
  std::remove(path.c_str());
}
