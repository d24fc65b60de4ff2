#pragma once

#include <cstdint>
#include <random>

namespace matchvar {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for sub-stream `index` of `master`. Every replication, chunk or
/// worker derives its stream this way, so results never depend on which
/// thread ran which unit of work.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double normal() { return normal_(engine_); }
  bool coin() noexcept { return (engine_() >> 63) != 0; }

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace matchvar
