#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <string_view>

namespace fedperi {

// 64-bit FNV-1a. Used to turn stream names and site names into key material.
constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives the key of a named stream: (seed, name, id...) -> 64-bit key.
// Every random draw in the library comes from a stream keyed this way, so
// results never depend on iteration order or thread scheduling.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::string_view name,
                                   std::initializer_list<std::uint64_t> ids = {}) {
  std::uint64_t h = splitmix64(seed ^ fnv1a(name));
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

// Counter-based generator: output n is splitmix64(key + n * golden).
// Satisfies UniformRandomBitGenerator so std distributions can consume it.
class KeyedRng {
 public:
  using result_type = std::uint64_t;

  explicit KeyedRng(std::uint64_t key) : key_(key) {}
  KeyedRng(std::uint64_t seed, std::string_view name,
           std::initializer_list<std::uint64_t> ids = {})
      : key_(stream_key(seed, name, ids)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    ++counter_;
    return splitmix64(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double stddev = 1.0) {
    std::normal_distribution<double> dist(mean, stddev);
    return dist(*this);
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
    return dist(*this);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace fedperi
