#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "um/rng.hpp"

using um::RandomStream;

TEST_CASE("same seed replays the same sequence") {
  RandomStream a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  RandomStream c(42), d(43);
  int equal = 0;
  for (int i = 0; i < 1000; ++i) equal += c.next_u64() == d.next_u64();
  CHECK(equal == 0);
}

TEST_CASE("derive is pure and keyed by path") {
  const RandomStream root(7);
  RandomStream a = root.derive("alpha");
  RandomStream b = root.derive("alpha");
  CHECK(a.key() == b.key());
  CHECK(a.next_u64() == b.next_u64());

  CHECK(root.derive("alpha").key() != root.derive("beta").key());
  CHECK(root.derive("alpha").key() != root.key());
  CHECK(root.derive(0).key() != root.derive(1).key());
  CHECK(root.derive(0).key() != root.derive("0").key());

  // Deriving and drawing do not interact: a stream's substreams are fixed
  // by its key alone.
  RandomStream consumer(7);
  consumer.next_u64();
  CHECK(consumer.derive("alpha").key() == root.derive("alpha").key());
}

TEST_CASE("uniform lands in [0,1) with the right mean") {
  RandomStream rng(1);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("uniform_int covers its range uniformly") {
  RandomStream rng(2);
  std::vector<int> counts(5, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const int v = rng.uniform_int(5);
    REQUIRE(v >= 0);
    REQUIRE(v < 5);
    ++counts[v];
  }
  for (int c : counts) CHECK(std::abs(c - n / 5) < 600);

  for (int i = 0; i < 100; ++i) CHECK(rng.uniform_int(1) == 0);
}

TEST_CASE("bernoulli respects degenerate and typical probabilities") {
  RandomStream rng(3);
  for (int i = 0; i < 100; ++i) {
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
  }
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3);
  CHECK(hits / static_cast<double>(n) == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("normal matches its first two moments") {
  RandomStream rng(4);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(2.0, 3.0);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sum_sq / n - mean * mean);
  CHECK(mean == doctest::Approx(2.0).epsilon(0.02));
  CHECK(std == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("gamma matches shape-rate moments above and below shape 1") {
  RandomStream rng(5);
  const int n = 200000;

  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gamma(3.0, 1.0);
    CHECK(x > 0.0);
    sum += x;
    sum_sq += x * x;
  }
  CHECK(sum / n == doctest::Approx(3.0).epsilon(0.01));
  CHECK(sum_sq / n - (sum / n) * (sum / n) ==
        doctest::Approx(3.0).epsilon(0.03));

  sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gamma(0.5, 2.0);
    CHECK(x > 0.0);
    sum += x;
  }
  CHECK(sum / n == doctest::Approx(0.25).epsilon(0.02));

  CHECK_THROWS(rng.gamma(0.0, 1.0));
  CHECK_THROWS(rng.gamma(1.0, -2.0));
}

TEST_CASE("categorical draws follow the probability vector") {
  RandomStream rng(6);
  Eigen::VectorXd probs(3);
  probs << 0.2, 0.3, 0.5;
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(probs)];
  for (int k = 0; k < 3; ++k) {
    CHECK(counts[k] / static_cast<double>(n) ==
          doctest::Approx(probs[k]).epsilon(0.03));
  }

  Eigen::VectorXd point(2);
  point << 0.0, 1.0;
  for (int i = 0; i < 100; ++i) CHECK(rng.categorical(point) == 1);
}
