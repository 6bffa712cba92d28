#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace sfgame {

/// Seeded random stream. Child streams are derived by name from the seed
/// alone, so the order in which streams are split never matters.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  [[nodiscard]] Rng split(std::string_view name) const;

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform index in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  bool bernoulli(double p);

  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace sfgame
