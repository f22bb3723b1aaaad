#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace feedloop {

// Seeded 64-bit generator with named substreams.
//
// Every stochastic component of the simulator draws from its own stream so
// that runs are reproducible and components can be re-ordered without
// perturbing each other's draws.  All distributions are implemented here
// (Box-Muller, Marsaglia-Tsang, gamma-ratio beta/Dirichlet) instead of
// std:: distributions, whose output is implementation-defined; identical
// (seed, stream) must reproduce identical draws on any platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  // Independent child stream; children with distinct ids never overlap in
  // practice (streams are mixed into the engine seed with splitmix64).
  SeededRng derive(std::uint64_t substream) const;

  std::uint64_t next_u64();
  double uniform();                            // [0, 1)
  double uniform_open();                       // (0, 1]
  double uniform(double lo, double hi);        // [lo, hi)
  std::uint64_t uniform_index(std::uint64_t n);  // {0, ..., n-1}, unbiased
  double normal();                             // standard normal
  double normal(double mean, double stddev);
  double gamma(double shape);                  // unit scale, shape > 0
  double beta(double a, double b);             // strictly inside (0, 1)
  Eigen::VectorXd dirichlet(const Eigen::VectorXd& alpha);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace feedloop
