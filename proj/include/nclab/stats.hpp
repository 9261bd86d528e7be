#pragma once

#include <vector>

namespace nclab {

struct RegressionFit {
  int n = 0;
  double slope = 0.0;
  double intercept = 0.0;
  double se = 0.0;  // standard error of the slope
  double t_value = 0.0;
  double p_value = 1.0;  // two-sided, n - 2 degrees of freedom
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  double r_squared = 0.0;
  double adj_r_squared = 0.0;
  double f_statistic = 0.0;
};

/// Simple OLS of y on x with intercept.
RegressionFit ols_fit(const std::vector<double>& x, const std::vector<double>& y);

/// I_x(a, b), continued fraction with modified Lentz.
double regularized_incomplete_beta(double x, double a, double b);
/// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);
/// Inverse of student_t_cdf on (0, 1).
double student_t_quantile(double p, double df);

}  // namespace nclab
