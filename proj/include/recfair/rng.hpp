#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "recfair/types.hpp"

// Deterministic randomness helpers. std::mt19937_64 has a portable output
// sequence, but the standard distributions do not, so every mapping from
// engine output to doubles/ints lives here.

namespace recfair {

// splitmix64 step; also used as a seed mixer.
std::uint64_t mix64(std::uint64_t z);

// Derives an independent stream seed from (base, salt).
seed_t derive_seed(seed_t base, seed_t salt);

class Rng {
 public:
  explicit Rng(seed_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). Modulo bias is irrelevant at our scales.
  std::uint64_t bounded(std::uint64_t n) { return engine_() % n; }

  // Standard normal via Box-Muller.
  double normal();

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// In-place Fisher-Yates shuffle, deterministic per seed.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.bounded(i));
    std::swap(v[i - 1], v[j]);
  }
}

// Counter-based uniform in [0, 1): independent of evaluation order.
double counter_uniform(seed_t seed, std::uint64_t counter);

}  // namespace recfair
