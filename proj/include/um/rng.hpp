#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string_view>

namespace um {

// Seedable random stream with key-based substream derivation.
//
// Every piece of randomness in the engine flows from one user seed through
// named derive() calls (e.g. derive("train/batch"), derive(cell_index)), so
// two components never share a stream by accident and results are
// bit-reproducible regardless of evaluation order or thread count.
//
// Draws are generated from raw mt19937_64 output with fixed arithmetic
// (no distribution objects with hidden state), so a value sequence can be
// replayed exactly from the same key.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  // Independent substream identified by a path tag or an index.
  RandomStream derive(std::string_view tag) const;
  RandomStream derive(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();
  // Uniform integer on {0, ..., n-1}; n >= 1.
  int uniform_int(int n);
  bool bernoulli(double p);
  double normal(double mean, double std);
  // Shape-rate parameterisation; shape > 0, rate > 0.
  double gamma(double shape, double rate);
  // Index draw from a probability vector (entries >= 0, sum approx. 1).
  int categorical(const Eigen::VectorXd& probs);

 private:
  RandomStream(std::uint64_t key, int);  // from raw key

  std::uint64_t key_;
  std::mt19937_64 engine_;
};

}  // namespace um
