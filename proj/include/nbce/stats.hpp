#pragma once

#include <vector>

#include "nbce/errors.hpp"

namespace nbce {

struct SignificanceResult {
    double t_statistic = 0.0;
    double p_value = 1.0;
    bool significant = false;  // p_value < 0.05
};

inline constexpr double k_significance_level = 0.05;

double mean(const std::vector<double> & xs);
// sample standard deviation, n-1 denominator
double sample_std(const std::vector<double> & xs);

// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);

// CDF of Student's t with (possibly fractional) dof.
double student_t_cdf(double t, double dof);

// Welch's unequal-variance two-sample t-test, two-sided p-value with
// Welch-Satterthwaite degrees of freedom. Each sample needs >= 2 points and
// at least one nonzero variance, else degenerate_samples_error.
SignificanceResult welch_t_test(const std::vector<double> & a, const std::vector<double> & b);

}  // namespace nbce
