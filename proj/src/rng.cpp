#include "ren/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace ren {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  return splitmix64(x);
}

std::uint64_t hash_bytes(std::string_view s) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

RngStream::RngStream(std::uint64_t seed) : key_(seed) { reseed(); }

void RngStream::reseed() {
  std::uint64_t s = key_;
  for (auto& w : state_) w = splitmix64(s);
}

RngStream RngStream::child(std::string_view label) const {
  return RngStream(mix(key_, hash_bytes(label)));
}

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream(mix(key_, index));
}

// xoshiro256++
std::uint64_t RngStream::next_u64() {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double RngStream::gamma(double concentration, double rate) {
  if (!(concentration > 0.0) || !(rate > 0.0)) {
    throw std::domain_error("RngStream::gamma: parameters must be positive");
  }
  if (concentration < 1e-6) {
    throw std::domain_error(
        "RngStream::gamma: concentration below 1e-6 is pathological");
  }
  double boost = 1.0;
  double a = concentration;
  if (a < 1.0) {
    const double u = 1.0 - uniform();  // (0, 1]
    boost = std::pow(u, 1.0 / a);
    a += 1.0;
  }
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = 1.0 - uniform();  // (0, 1], log-safe
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2 ||
        std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
      const double sample = boost * d * v / rate;
      return sample > 1e-300 ? sample : 1e-300;
    }
  }
}

}  // namespace ren
