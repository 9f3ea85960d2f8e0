#include "ipcnet/rng.hpp"

namespace ipcnet {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64_finalize(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(seed ^ splitmix64_finalize(stream + kGolden)) {}

std::uint64_t CounterRng::next_u64() noexcept {
  ++counter_;
  return splitmix64_finalize(key_ + counter_ * kGolden);
}

double CounterRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform(double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform();
}

std::uint64_t CounterRng::below(std::uint64_t bound) noexcept {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % bound;
}

std::uint64_t CounterRng::derive(std::uint64_t seed, std::uint64_t tag) noexcept {
  return splitmix64_finalize(seed + splitmix64_finalize(tag ^ kGolden));
}

}  // namespace ipcnet
