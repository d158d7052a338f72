#include "um/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace um {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed)
    : key_(splitmix64(seed)), engine_(key_) {}

RandomStream::RandomStream(std::uint64_t key, int) : key_(key), engine_(key) {}

RandomStream RandomStream::derive(std::string_view tag) const {
  return RandomStream(splitmix64(key_ ^ fnv1a64(tag)), 0);
}

RandomStream RandomStream::derive(std::uint64_t index) const {
  return RandomStream(splitmix64(key_ + 0xd1b54a32d192ed03ull * (index + 1)), 0);
}

std::uint64_t RandomStream::next_u64() { return engine_(); }

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

int RandomStream::uniform_int(int n) {
  int v = static_cast<int>(uniform() * n);
  return v < n ? v : n - 1;
}

bool RandomStream::bernoulli(double p) { return uniform() < p; }

double RandomStream::normal(double mean, double std) {
  // Box-Muller, cosine branch only; two uniforms per draw keeps the stream
  // position independent of any cached state.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return mean + std * r * std::cos(2.0 * std::numbers::pi * u2);
}

double RandomStream::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw std::invalid_argument("gamma: shape and rate must be positive");
  }
  // Marsaglia-Tsang squeeze; shape < 1 boosted via the U^(1/shape) identity.
  double boost = 1.0;
  double a = shape;
  if (a < 1.0) {
    boost = std::pow(1.0 - uniform(), 1.0 / a);  // (1-u) avoids pow(0, ...)
    a += 1.0;
  }
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal(0.0, 1.0);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = 1.0 - uniform();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
      return boost * d * v / rate;
    }
  }
}

int RandomStream::categorical(const Eigen::VectorXd& probs) {
  const double u = uniform();
  double acc = 0.0;
  const int k = static_cast<int>(probs.size());
  for (int i = 0; i < k; ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return k - 1;
}

}  // namespace um
