#include "feedloop/stats.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace feedloop {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction failed");
}

}  // namespace

double mean(std::span<const double> xs) {
  require(!xs.empty(), "mean: empty input");
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, "incomplete_beta: shapes must be positive");
  require(x >= 0.0 && x <= 1.0, "incomplete_beta: x must be in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) -
                           std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(a) -
                        std::lgamma(b) + b * std::log1p(-x) +
                        a * std::log(x)) *
                   beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  require(df > 0.0, "student_t_cdf: df must be positive");
  if (t == 0.0) return 0.5;
  const double x = df / (df + t * t);
  const double half_tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - half_tail : half_tail;
}

double student_t_quantile(double p, double df) {
  require(p > 0.0 && p < 1.0, "student_t_quantile: p must be inside (0, 1)");
  double lo = -1e8, hi = 1e8;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

double paired_one_sided_p(std::span<const double> a,
                          std::span<const double> b) {
  require(a.size() == b.size(), "paired test: length mismatch");
  require(a.size() >= 2, "paired test: need at least two pairs");
  std::vector<double> d(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) d[j] = a[j] - b[j];
  const double m = mean(d);
  const double s = sample_std(d);
  const double n = static_cast<double>(d.size());
  if (s == 0.0) return m < 0.0 ? 0.0 : 1.0;  // degenerate: all gaps equal
  const double t = m / (s / std::sqrt(n));
  // Small p when m is negative (a below b).
  return student_t_cdf(t, n - 1.0);
}

double ci_halfwidth(std::span<const double> xs, bool use_tdist) {
  require(xs.size() >= 2, "ci_halfwidth: need at least two replications");
  const double n = static_cast<double>(xs.size());
  const double z =
      use_tdist ? student_t_quantile(0.975, n - 1.0) : 1.96;
  return z * sample_std(xs) / std::sqrt(n);
}

}  // namespace feedloop
