#include <cmath>
#include <vector>

#include <doctest.h>

#include "feedloop/rng.hpp"

using namespace feedloop;

TEST_CASE("identical seed and stream reproduce identical draws") {
  SeededRng a(42, 7), b(42, 7);
  for (int k = 0; k < 256; ++k) CHECK(a.next_u64() == b.next_u64());

  SeededRng c(42, 7), d(42, 7);
  for (int k = 0; k < 64; ++k) {
    CHECK(c.uniform() == d.uniform());
    CHECK(c.normal() == d.normal());
    CHECK(c.gamma(1.7) == d.gamma(1.7));
    CHECK(c.beta(2.0, 5.0) == d.beta(2.0, 5.0));
  }
}

TEST_CASE("distinct seeds or streams give distinct sequences") {
  SeededRng a(42, 0), b(43, 0), c(42, 1);
  int equal_ab = 0, equal_ac = 0;
  for (int k = 0; k < 64; ++k) {
    const std::uint64_t x = a.next_u64();
    if (x == b.next_u64()) ++equal_ab;
    if (x == c.next_u64()) ++equal_ac;
  }
  CHECK(equal_ab == 0);
  CHECK(equal_ac == 0);
}

TEST_CASE("derive produces decoupled child streams") {
  SeededRng root(99, 0);
  SeededRng child1 = root.derive(1);
  SeededRng child1_again = SeededRng(99, 0).derive(1);
  SeededRng child2 = root.derive(2);

  // Same child id: identical stream.  Different id: decoupled.
  CHECK(child1.next_u64() == child1_again.next_u64());
  SeededRng c1 = root.derive(1);
  int equal = 0;
  for (int k = 0; k < 64; ++k)
    if (c1.next_u64() == child2.next_u64()) ++equal;
  CHECK(equal == 0);

  // Deriving does not advance the parent.
  SeededRng p1(5, 3), p2(5, 3);
  (void)p1.derive(11);
  CHECK(p1.next_u64() == p2.next_u64());
}

TEST_CASE("uniform ranges and index bounds") {
  SeededRng rng(1, 0);
  for (int k = 0; k < 10000; ++k) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform_open();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    const double w = rng.uniform(-2.0, 3.0);
    CHECK(w >= -2.0);
    CHECK(w < 3.0);
    CHECK(rng.uniform_index(7) < 7);
  }
}

TEST_CASE("uniform_index covers all residues roughly evenly") {
  SeededRng rng(2, 0);
  std::vector<int> counts(5, 0);
  const int n = 50000;
  for (int k = 0; k < n; ++k) ++counts[rng.uniform_index(5)];
  for (int c : counts) {
    // Expected 10000 per bucket; 5 sigma is ~450.
    CHECK(c > 9500);
    CHECK(c < 10500);
  }
}

TEST_CASE("normal moments") {
  SeededRng rng(3, 0);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  const double m = sum / n;
  const double var = sum2 / n - m * m;
  // SE of the mean is 1/sqrt(n) ~ 0.0032; allow 4 SE.
  CHECK(std::abs(m) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 0.03);

  SeededRng rng2(3, 1);
  double shifted = 0.0;
  for (int k = 0; k < n; ++k) shifted += rng2.normal(2.0, 0.5);
  CHECK(std::abs(shifted / n - 2.0) < 4.0 * 0.5 / std::sqrt(double(n)));
}

TEST_CASE("gamma and beta moments") {
  SeededRng rng(4, 0);
  const int n = 100000;

  // Gamma(shape) on unit scale has mean = shape, variance = shape.
  for (double shape : {0.5, 1.0, 3.7}) {
    double sum = 0.0;
    for (int k = 0; k < n; ++k) sum += rng.gamma(shape);
    const double se = std::sqrt(shape / n);
    CHECK(std::abs(sum / n - shape) < 4.0 * se);
  }

  // Beta(a, b) has mean a/(a+b); draws stay strictly inside (0, 1).
  const double a = 2.0, b = 6.0;
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = rng.beta(a, b);
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    sum += x;
  }
  const double mu = a / (a + b);
  const double var = a * b / ((a + b) * (a + b) * (a + b + 1.0));
  CHECK(std::abs(sum / n - mu) < 4.0 * std::sqrt(var / n));
}

TEST_CASE("dirichlet draws live on the simplex with the right mean") {
  SeededRng rng(5, 0);
  Eigen::VectorXd alpha(3);
  alpha << 2.0, 5.0, 3.0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXd x = rng.dirichlet(alpha);
    CHECK(x.minCoeff() >= 0.0);
    CHECK(std::abs(x.sum() - 1.0) < 1e-12);
    sum += x;
  }
  const Eigen::VectorXd mu = alpha / alpha.sum();
  for (int j = 0; j < 3; ++j) {
    const double var = mu[j] * (1.0 - mu[j]) / (alpha.sum() + 1.0);
    CHECK(std::abs(sum[j] / n - mu[j]) < 4.0 * std::sqrt(var / n));
  }
}
