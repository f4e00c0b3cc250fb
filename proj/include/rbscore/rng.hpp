#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rbscore {

// Seedable random stream. Every random draw in the library goes through one of
// these, passed explicitly by reference.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return uniform_(engine_); }
  double normal() { return normal_(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal_(engine_); }
  double exponential() { return exponential_(engine_); }
  double gamma(double shape, double scale);
  // Inverse-gamma with the (shape, rate) convention: 1 / Gamma(shape, 1/rate).
  double inverse_gamma(double shape, double rate);
  std::uint64_t poisson(double rate);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::exponential_distribution<double> exponential_{1.0};
};

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Deterministic child seed from a root seed and an ordered list of keys.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> keys);

}  // namespace rbscore
