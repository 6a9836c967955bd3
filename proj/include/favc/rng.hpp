#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace favc {

// Deterministic 64-bit generator (splitmix64 core). The standard library
// engines/distributions are implementation-defined across platforms, so all
// randomness in the project flows through this class: synthetic data,
// parameter init, batch shuffling and the perturbation streams.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  // Stream derivation for perturbations: identical inputs give identical
  // streams by construction.
  static Rng derive(uint64_t seed, std::string_view condition, uint64_t repeat,
                    uint64_t segment_index);

  static uint64_t mix(uint64_t a, uint64_t b);
  static uint64_t hash_str(std::string_view s);  // FNV-1a

  uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  int uniform_int(int n);                 // [0, n)
  double normal();                        // standard normal, Box-Muller
  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Deterministic Fisher-Yates shuffle of index vectors.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
      int j = uniform_int(i + 1);
      std::swap(v[i], v[static_cast<size_t>(j)]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace favc
