#pragma once

#include <cstdint>
#include <random>

namespace frvm {

/// SplitMix64 finalizer. Used to turn (seed, stream) pairs into engine seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
}

/// Supplier of seed material for production use. Simulations take explicit
/// seeds instead so that traces are reproducible.
class EntropySource {
 public:
  virtual ~EntropySource() = default;
  virtual std::uint64_t next_seed() = 0;
};

class SystemEntropy final : public EntropySource {
 public:
  std::uint64_t next_seed() override {
    return (std::uint64_t{device_()} << 32) ^ std::uint64_t{device_()};
  }

 private:
  std::random_device device_;
};

/// Seedable, splittable random source.
///
/// Bounded draws use Lemire's multiply-and-reject method rather than
/// std::uniform_int_distribution, whose output is implementation defined;
/// golden traces must not depend on the standard library vendor.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static RandomSource from_entropy(EntropySource& entropy) {
    return RandomSource(entropy.next_seed());
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    auto product = static_cast<unsigned __int128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(product);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        product = static_cast<unsigned __int128>(engine_()) * bound;
        low = static_cast<std::uint64_t>(product);
      }
    }
    return static_cast<std::uint64_t>(product >> 64);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Independent child stream. Depends only on the original seed and the
  /// stream number, never on how much of this source has been consumed.
  RandomSource split(std::uint64_t stream) const {
    return RandomSource(derive_seed(seed_, stream));
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace frvm
