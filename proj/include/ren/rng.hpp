#pragma once

#include <cstdint>
#include <string_view>

namespace ren {

/// Deterministic random stream with labeled splitting.
///
/// Every stream is identified by a 64-bit key. Children are derived from the
/// parent's key and a label, never from the parent's consumption state, so
/// adding a new consumer cannot perturb sibling streams.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  RngStream child(std::string_view label) const;
  RngStream child(std::uint64_t index) const;

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal();

  /// Gamma(concentration, rate) via Marsaglia-Tsang, with the
  /// u^(1/a) boost for concentration < 1. Result clamped away from zero so
  /// downstream log-densities stay finite.
  double gamma(double concentration, double rate);

  std::uint64_t key() const { return key_; }

 private:
  void reseed();

  std::uint64_t key_;
  std::uint64_t state_[4];
};

}  // namespace ren
