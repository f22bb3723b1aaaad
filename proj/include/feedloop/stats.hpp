#pragma once

#include <span>

namespace feedloop {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator); 0 for n < 2.
double sample_std(std::span<const double> xs);

// Regularized incomplete beta function I_x(a, b) via the standard
// continued-fraction expansion.
double incomplete_beta(double a, double b, double x);

// Student-t distribution with `df` degrees of freedom.
double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);  // inverse CDF

// One-sided paired test: p-value for the alternative mean(a - b) < 0,
// i.e. small p supports "a is systematically below b".
double paired_one_sided_p(std::span<const double> a, std::span<const double> b);

// Half-width of a 95% confidence interval for the mean: z = 1.96 by
// default, or the matching t quantile when use_tdist is set.  Defined for
// n >= 2 only.
double ci_halfwidth(std::span<const double> xs, bool use_tdist);

}  // namespace feedloop
