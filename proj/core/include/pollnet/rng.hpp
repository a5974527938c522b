#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace pollnet {

/// Seeded random source with platform-independent draws.
///
/// The engine is std::mt19937_64 (its output sequence is fixed by the
/// standard); every mapping from raw bits to a distribution lives here so
/// that results do not depend on the standard library's distribution
/// implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for (seed, tag, index). Used to give every stage and
  /// every parallel work item its own generator.
  static Rng derive(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  /// Exponential with the given rate, by inversion.
  double exponential(double rate);

  /// Standard normal via Box-Muller (no cached second value).
  double normal();

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace pollnet
