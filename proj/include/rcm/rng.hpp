#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace rcm {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed for the stream addressed by (master, tags...). Streams with different
// tag tuples are statistically independent for all practical purposes, which
// makes results independent of the order workers pick up tasks.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = mix64(master);
  for (auto t : tags) h = mix64(h ^ mix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

// FNV-1a, for turning experiment names into stream tags.
inline std::uint64_t hash_name(const char* s) noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  for (; *s; ++s) h = (h ^ static_cast<unsigned char>(*s)) * 1099511628211ULL;
  return h;
}

// Random stream. Conversions to doubles are done here rather than through
// <random> distributions so that sampled values are identical across
// standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1].
  double uniform_open0() { return 1.0 - uniform(); }

  double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

  std::int64_t below(std::int64_t m) {
    return static_cast<std::int64_t>(uniform() * static_cast<double>(m));
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rcm
