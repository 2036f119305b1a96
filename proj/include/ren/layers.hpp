#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ren/rng.hpp"
#include "ren/tensor.hpp"

namespace ren {

/// Stable, ordered (name, parameter) pairs; the order defines optimizer and
/// checkpoint layout.
using NamedParams = std::vector<std::pair<std::string, Tensor>>;

struct Linear {
  Tensor W;  // {in, out}
  Tensor b;  // {out}

  Tensor apply(const Tensor& x) const;  // {N, in} -> {N, out}
  void collect(const std::string& prefix, NamedParams& out) const;
};

/// Kaiming-uniform fan-in weights, zero biases.
Linear make_linear(long in, long out, RngStream& rng);

enum class Act { kRelu, kTanh };

/// Dense stack: activation after every layer except (optionally) the last.
struct Mlp {
  std::vector<Linear> layers;
  Act act = Act::kRelu;
  bool act_final = false;

  Tensor apply(const Tensor& x) const;
  void collect(const std::string& prefix, NamedParams& out) const;
};

Mlp make_mlp(const std::vector<long>& widths, Act act, RngStream& rng,
             bool act_final = false);

}  // namespace ren
