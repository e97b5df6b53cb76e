#include "cmlf/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cmlf::eval {

namespace {

double incomplete_beta_cf(double x, double a, double b) {
  // modified Lentz algorithm on the textbook continued fraction
  const double tiny = 1e-300;
  auto numer = [&](int n) {
    if (n % 2 == 0) {
      double m = n / 2;
      return m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    }
    double m = (n - 1) / 2;
    return -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
  };
  double c = 1.0, d = 0.0, result = 1.0;
  for (int n = 1; n < 200000; ++n) {
    double an = numer(n);
    d = 1.0 + an * d;
    if (d == 0.0) d = tiny;
    c = 1.0 + an / c;
    if (c == 0.0) c = tiny;
    d = 1.0 / d;
    double mult = c * d;
    result *= mult;
    if (std::fabs(mult - 1.0) <= 1e-15) break;
  }
  return result;
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0 && a > 0.0 && b > 0.0))
    throw ContractError("regularized_incomplete_beta: invalid arguments");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  double front = std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta);
  if (x < (a + 1.0) / (a + b + 2.0)) return front / (a * incomplete_beta_cf(x, a, b));
  return 1.0 - std::exp(b * std::log(1.0 - x) + a * std::log(x) - log_beta) /
                   (b * incomplete_beta_cf(1.0 - x, b, a));
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw ContractError("student_t_cdf: dof must be positive");
  if (t == 0.0) return 0.5;
  double x = dof / (dof + t * t);
  double tail = 0.5 * regularized_incomplete_beta(x, 0.5 * dof, 0.5);
  return t > 0.0 ? 1.0 - tail : tail;
}

TestResult paired_t_test(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                         Alternative alternative) {
  if (a.size() != b.size()) throw ContractError("paired_t_test: unequal trajectory pairing");
  if (a.size() < 2) throw ContractError("paired_t_test: need at least 2 pairs");
  const int n = static_cast<int>(a.size());
  Eigen::VectorXd d = a - b;
  double mean = d.mean();
  double var = (d.array() - mean).square().sum() / (n - 1);
  double sd = std::sqrt(var);

  TestResult result;
  result.n = n;
  const double eps = 1e-300;
  if (sd < eps) {
    result.statistic = 0.0;
    result.p_value = std::abs(mean) < eps ? 1.0 : 0.0;
    return result;
  }
  double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  result.statistic = t;
  double cdf = student_t_cdf(t, n - 1);
  switch (alternative) {
    case Alternative::two_sided: result.p_value = 2.0 * std::min(cdf, 1.0 - cdf); break;
    case Alternative::less: result.p_value = cdf; break;
    case Alternative::greater: result.p_value = 1.0 - cdf; break;
  }
  result.p_value = std::min(1.0, std::max(0.0, result.p_value));
  return result;
}

std::vector<double> holm_bonferroni(const std::vector<double>& raw_p) {
  const std::size_t m = raw_p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return raw_p[i] < raw_p[j]; });
  std::vector<double> adjusted(m, 0.0);
  double running_max = 0.0;
  for (std::size_t rank = 0; rank < m; ++rank) {
    double p = raw_p[order[rank]];
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("holm_bonferroni: p outside [0, 1]");
    double scaled = std::min(1.0, static_cast<double>(m - rank) * p);
    running_max = std::max(running_max, scaled);
    adjusted[order[rank]] = running_max;
  }
  return adjusted;
}

const char* significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "ns";
}

}  // namespace cmlf::eval
