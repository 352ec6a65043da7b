#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ccmia {

// SplitMix64 finalizer. Also the engine step below.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
  // FNV-1a 64-bit
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Seed-split rule used everywhere: every random stream is derived from the
// master seed plus a string tag and up to two integer indices. Reruns with
// the same master seed therefore reproduce every stream exactly.
inline std::uint64_t sub_seed(std::uint64_t seed, std::string_view tag,
                              std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(seed + 0x9E3779B97F4A7C15ull);
  s = mix64(s ^ hash_str(tag));
  s = mix64(s ^ (a + 0x9E3779B97F4A7C15ull));
  s = mix64(s ^ (b + 0x632BE59BD9B4E019ull));
  return s;
}

// Deterministic PRNG. Does not use std::..._distribution (their output is
// implementation-defined); all draws below are reproducible bit-for-bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix64(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; one spare cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // avoid log(0)
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n), n >= 1. Lemire's multiply-shift method.
  std::uint64_t uniform_int(std::uint64_t n) {
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // Gamma(shape=k, scale=theta) for integer shape: sum of k exponentials.
  double gamma_int(int k, double theta) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) acc += -std::log1p(-uniform01());
    return theta * acc;
  }

  // Uniform direction on the unit sphere in d dimensions.
  Eigen::VectorXd unit_sphere(int d) {
    Eigen::VectorXd v(d);
    double norm2;
    do {
      for (int i = 0; i < d; ++i) v(i) = normal();
      norm2 = v.squaredNorm();
    } while (norm2 == 0.0);
    return v / std::sqrt(norm2);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ccmia
