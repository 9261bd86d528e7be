#include "nclab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "nclab/errors.hpp"

namespace nclab {

namespace {

double beta_continued_fraction(double x, double a, double b) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
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
  throw NumericError("regularized_incomplete_beta: continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0 && b > 0)) throw DomainError("regularized_incomplete_beta: a and b must be positive");
  if (!(x >= 0 && x <= 1)) throw DomainError("regularized_incomplete_beta: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0)) throw DomainError("student_t_cdf: df must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double t2 = t * t;
  if (t2 < df) {
    // Near zero df/(df+t^2) rounds to 1; the complementary argument keeps the digits.
    const double centre = 0.5 * regularized_incomplete_beta(t2 / (df + t2), 0.5, df / 2.0);
    return t > 0 ? 0.5 + centre : 0.5 - centre;
  }
  const double tail = 0.5 * regularized_incomplete_beta(df / (df + t2), df / 2.0, 0.5);
  return t > 0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (!(p > 0 && p < 1)) throw DomainError("student_t_quantile: p outside (0, 1)");
  double lo = -1.0;
  double hi = 1.0;
  while (student_t_cdf(lo, df) > p) lo *= 2.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

RegressionFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw ShapeError("ols_fit: x has " + std::to_string(x.size()) + " values, y has " + std::to_string(y.size()));
  }
  if (x.size() < 3) throw DomainError("ols_fit: need at least 3 points");
  const double n = static_cast<double>(x.size());

  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0)) throw DomainError("ols_fit: x is constant");

  RegressionFit fit;
  fit.n = static_cast<int>(x.size());
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;

  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    sse += r * r;
  }
  const double df = n - 2.0;
  fit.se = std::sqrt(sse / df / sxx);
  fit.r_squared = syy > 0 ? std::clamp(1.0 - sse / syy, 0.0, 1.0) : 1.0;
  fit.adj_r_squared = 1.0 - (1.0 - fit.r_squared) * (n - 1.0) / df;

  const double q = student_t_quantile(0.975, df);
  if (fit.se > 0) {
    fit.t_value = fit.slope / fit.se;
    fit.p_value = 2.0 * student_t_cdf(-std::abs(fit.t_value), df);
    fit.f_statistic = fit.t_value * fit.t_value;
  } else {
    // Perfect fit: the statistic is unbounded.
    fit.t_value = fit.slope == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), fit.slope);
    fit.p_value = fit.slope == 0.0 ? 1.0 : 0.0;
    fit.f_statistic = fit.t_value * fit.t_value;
  }
  fit.ci95_low = fit.slope - q * fit.se;
  fit.ci95_high = fit.slope + q * fit.se;
  return fit;
}

}  // namespace nclab
