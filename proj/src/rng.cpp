#include "favc/rng.hpp"

#include <cmath>

namespace favc {

namespace {
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

uint64_t Rng::mix(uint64_t a, uint64_t b) {
  uint64_t s = a;
  uint64_t h = splitmix64(s) ^ b;
  return splitmix64(h);
}

uint64_t Rng::hash_str(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng Rng::derive(uint64_t seed, std::string_view condition, uint64_t repeat,
                uint64_t segment_index) {
  uint64_t s = mix(seed, hash_str(condition));
  s = mix(s, repeat);
  s = mix(s, segment_index);
  return Rng(s);
}

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int n) {
  return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

}  // namespace favc
