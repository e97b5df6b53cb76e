// Paired hypothesis tests with Holm-Bonferroni family-wise correction.
#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "cmlf/errors.hpp"

namespace cmlf::eval {

/// Regularized incomplete beta function I_x(a, b) via the Lentz
/// continued-fraction expansion.
double regularized_incomplete_beta(double x, double a, double b);

/// CDF of Student's t distribution with dof degrees of freedom.
double student_t_cdf(double t, double dof);

enum class Alternative { two_sided, less, greater };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int n = 0;
};

/// Paired t-test on per-trajectory differences a[i] - b[i]. Degenerate
/// zero-variance differences give p = 1 when the mean difference is zero
/// and p = 0 otherwise.
TestResult paired_t_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                         Alternative alternative = Alternative::two_sided);

/// Holm step-down adjustment within one family; monotone and never below
/// the raw p-values.
std::vector<double> holm_bonferroni(const std::vector<double>& raw_p);

/// Star annotation at the 0.001 / 0.01 / 0.05 thresholds.
const char* significance_stars(double p);

}  // namespace cmlf::eval
