#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace vmask {

// Deterministic seed derivation. Every logical random stream in a run is a
// named substream of the master seed, so the order in which parties or
// threads happen to draw from unrelated streams can never change the values
// drawn. Tags identify (purpose, party, epoch, ...) tuples.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fold_seed(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Stream purposes. Values are part of the run's deterministic behavior;
// do not renumber without expecting every seeded result to change.
enum class Stream : std::uint64_t {
  Init = 1,        // model parameter init (per party; shadows reuse it)
  InitTop = 2,     // active party's top model
  Split = 3,       // train/test row shuffle
  BatchOrder = 4,  // per-epoch mini-batch permutation
  AuxSample = 5,   // auxiliary dataset row sampling
  MaskNoise = 6,   // sigma-noise added at mask transitions
  ShareMask = 7,   // share randomness for parameter sharing
  ShareData = 8,   // share randomness for activations/gradients
  Triple = 9,      // Beaver triple dealer
  Attack = 10,     // harness-level model-completion attacks
  SimAttack = 11,  // locally simulated attacks inside layer selection
  Select = 12,     // random layer params + random-selection variant
  Blob = 13,       // synthetic dataset generation
  AuxNoise = 14,   // optional aux feature corruption
};

struct Rng {
  std::mt19937_64 eng;

  explicit Rng(std::uint64_t seed) : eng(seed) {}

  static Rng derive(std::uint64_t master, Stream s,
                    std::initializer_list<std::uint64_t> tags = {}) {
    std::uint64_t h = fold_seed(master, static_cast<std::uint64_t>(s));
    for (std::uint64_t t : tags) h = fold_seed(h, t);
    return Rng(h);
  }

  std::uint64_t bits() { return eng(); }

  // Uniform in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(eng);
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng);
  }

  double normal(double mean, double stddev) {
    std::normal_distribution<double> d(mean, stddev);
    return d(eng);
  }
};

}  // namespace vmask
