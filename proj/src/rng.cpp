#include "feedloop/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace feedloop {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  engine_.seed(splitmix64(splitmix64(seed) ^ splitmix64(~stream)));
}

SeededRng SeededRng::derive(std::uint64_t substream) const {
  return SeededRng(seed_, splitmix64(stream_) + substream);
}

std::uint64_t SeededRng::next_u64() { return engine_(); }

double SeededRng::uniform() {
  // 53 random bits -> double in [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform_open() { return 1.0 - uniform(); }

double SeededRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::uint64_t SeededRng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double SeededRng::normal() {
  // Box-Muller, cosine branch only; stateless across calls by design.
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double SeededRng::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

double SeededRng::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
  if (shape < 1.0) {
    // Boost trick: Gamma(a) = Gamma(a + 1) * U^(1/a).
    const double u = uniform_open();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia & Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double SeededRng::beta(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("beta: shapes must be > 0");
  double x = 0.0, y = 0.0;
  // Tiny shapes can underflow both gammas to zero; retry (astronomically
  // rare for the shapes this project uses).
  do {
    x = gamma(a);
    y = gamma(b);
  } while (x + y <= 0.0);
  double r = x / (x + y);
  // Keep draws strictly inside the open interval.
  if (r <= 0.0) r = std::numeric_limits<double>::min();
  if (r >= 1.0) r = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return r;
}

Eigen::VectorXd SeededRng::dirichlet(const Eigen::VectorXd& alpha) {
  if (alpha.size() == 0)
    throw std::invalid_argument("dirichlet: empty concentration vector");
  Eigen::VectorXd g(alpha.size());
  double total = 0.0;
  do {
    for (Eigen::Index k = 0; k < alpha.size(); ++k) g[k] = gamma(alpha[k]);
    total = g.sum();
  } while (total <= 0.0);
  return g / total;
}

}  // namespace feedloop
