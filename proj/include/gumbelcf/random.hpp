#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gumbelcf {

/// Seedable random stream. Draws are produced from raw engine bits so that
/// sequences are identical across standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

/// Stable 64-bit hash of a label (FNV-1a).
std::uint64_t hash_label(std::string_view label);

/// Derives an independent stream seed for a named sub-task.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

}  // namespace gumbelcf
