#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace markov_sgd {

/// Mixes a user seed with a stream label (FNV-1a of the label, then SplitMix64).
/// Every random consumer in the library derives its own stream this way, so a
/// single top-level seed fans out into independent, reproducible streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

/// MT19937-64 with portable draws.
///
/// The std distributions are implementation-defined, so uniform and normal
/// variates are produced here from the raw 64-bit output (53-bit mantissa and
/// Box-Muller). Identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t seed, std::string_view label) {
    return Rng(derive_seed(seed, label));
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal();

  /// Index i with cdf[i-1] <= u < cdf[i]; the last entry is treated as 1.
  std::size_t categorical(std::span<const double> cdf);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace markov_sgd
