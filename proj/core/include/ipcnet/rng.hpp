#pragma once

#include <cstddef>
#include <cstdint>

namespace ipcnet {

// Counter-based generator: the i-th draw of stream (seed, stream) is
// splitmix64_finalize(seed ^ mix(stream) + (i + 1) * 0x9E3779B97F4A7C15).
// Any language with 64-bit unsigned arithmetic reproduces the sequence.
// Uniform doubles use the high 53 bits of each 64-bit draw.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  // [0, 1)
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  // [0, bound), bound > 0. Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t bound) noexcept;

  std::uint64_t counter() const noexcept { return counter_; }

  // Seed for an independent child stream (per-cloud, per-epoch, ...).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_finalize(std::uint64_t z) noexcept;

}  // namespace ipcnet
