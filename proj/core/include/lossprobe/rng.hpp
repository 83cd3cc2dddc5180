#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lossprobe {

// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used to derive independent
// child seeds; never used as a stream generator on its own.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text) noexcept;

// Child seed for the (parent, label, index) triple:
//   splitmix64(splitmix64(parent ^ fnv1a64(label)) + index)
// Adding new labels or indices never changes the seeds of existing ones.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view label,
                          std::uint64_t index = 0) noexcept;

// Seedable, splittable generator. The stream is std::mt19937_64 seeded with
// the 64-bit seed; `split` produces a child generator via derive_seed.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t seed() const noexcept { return seed_; }
  Rng split(std::string_view label, std::uint64_t index = 0) const {
    return Rng(derive_seed(seed_, label, index));
  }

  // Uniform integer in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  // Uniform real in [0, 1).
  double uniform01();
  bool bernoulli(double p);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace lossprobe
