#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include "nclab/errors.hpp"
#include "nclab/stats.hpp"

using namespace nclab;

namespace {

struct NormalEquations {
  double slope, intercept, se, t;
};

// Design matrix [1 x], solve (X^T X) b = X^T y, var(b) = s^2 (X^T X)^-1.
NormalEquations normal_equations(const std::vector<double>& x, const std::vector<double>& y) {
  const Eigen::Index n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd design(n, 2);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = x[i];
    target(i) = y[i];
  }
  const Eigen::Matrix2d gram = design.transpose() * design;
  const Eigen::Vector2d beta = gram.ldlt().solve(design.transpose() * target);
  const double s2 = (target - design * beta).squaredNorm() / static_cast<double>(n - 2);
  const double se = std::sqrt(s2 * gram.inverse()(1, 1));
  return {beta(1), beta(0), se, beta(1) / se};
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

}  // namespace

TEST(Ols, ExactLine) {
  const auto f = ols_fit({1, 2, 3}, {2, 4, 6});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 0.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);
  EXPECT_NEAR(f.se, 0.0, 1e-14);
  EXPECT_EQ(f.n, 3);
}

TEST(Ols, FivePointFixtureMatchesNormalEquations) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{1.1, 1.9, 3.0, 4.1, 4.9};
  const auto f = ols_fit(x, y);
  const auto ref = normal_equations(x, y);
  EXPECT_NEAR(f.slope, ref.slope, 1e-10);
  EXPECT_NEAR(f.intercept, ref.intercept, 1e-10);
  EXPECT_NEAR(f.se, ref.se, 1e-10);
  EXPECT_NEAR(f.t_value, ref.t, 1e-10 * std::abs(ref.t));
  EXPECT_NEAR(f.slope, 0.98, 1e-12);  // Sxy = 9.8, Sxx = 10
  EXPECT_NEAR(f.t_value * f.t_value, f.f_statistic, 1e-9 * f.f_statistic);
}

TEST(Ols, ZeroCovarianceCloud) {
  const auto f = ols_fit({1, 2, 3, 4}, {1, -1, -1, 1});
  EXPECT_NEAR(f.slope, 0.0, 1e-15);
  EXPECT_NEAR(f.r_squared, 0.0, 1e-15);
  EXPECT_NEAR(f.t_value, 0.0, 1e-15);
  EXPECT_NEAR(f.p_value, 1.0, 1e-12);
}

TEST(Ols, InferenceAgainstReferenceDistribution) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + trial;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = noise(rng);
      y[i] = 0.3 * x[i] + noise(rng);
    }
    const auto f = ols_fit(x, y);
    const auto ref = normal_equations(x, y);
    EXPECT_NEAR(f.slope, ref.slope, 1e-10 * std::max(1.0, std::abs(ref.slope)));
    EXPECT_NEAR(f.se, ref.se, 1e-10 * ref.se);

    boost::math::students_t dist(n - 2);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(ref.t)));
    EXPECT_NEAR(f.p_value, p, 1e-10 + 1e-8 * p) << "n " << n;
    const double q = boost::math::quantile(dist, 0.975);
    EXPECT_NEAR(f.ci95_low, ref.slope - q * ref.se, 1e-9);
    EXPECT_NEAR(f.ci95_high, ref.slope + q * ref.se, 1e-9);

    const double r = pearson(x, y);
    EXPECT_NEAR(f.r_squared, r * r, 1e-10);
    EXPECT_NEAR(f.adj_r_squared, 1.0 - (1.0 - r * r) * (n - 1) / (n - 2.0), 1e-10);
    EXPECT_NEAR(f.t_value * f.t_value, f.f_statistic, 1e-9 * std::max(1.0, f.f_statistic));
    EXPECT_GE(f.r_squared, 0.0);
    EXPECT_LE(f.r_squared, 1.0);
  }
}

TEST(Ols, ShiftScaleEquivariance) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d;
  std::vector<double> x(20), y(20);
  for (int i = 0; i < 20; ++i) {
    x[i] = d(rng);
    y[i] = 2.0 - 0.7 * x[i] + 0.2 * d(rng);
  }
  const auto base = ols_fit(x, y);
  for (double a : {-3.0, 0.01, 250.0}) {
    for (double b : {-10.0, 0.0, 1e3}) {
      std::vector<double> xs(20);
      for (int i = 0; i < 20; ++i) xs[i] = a * x[i] + b;
      const auto f = ols_fit(xs, y);
      EXPECT_NEAR(f.slope, base.slope / a, 1e-10 * std::max(1.0, std::abs(base.slope / a)));
      EXPECT_NEAR(f.r_squared, base.r_squared, 1e-10);
      EXPECT_NEAR(std::abs(f.t_value), std::abs(base.t_value), 1e-8 * std::abs(base.t_value));
    }
  }
}

TEST(Ols, Errors) {
  EXPECT_THROW(ols_fit({1, 1, 1, 1}, {1, 2, 3, 4}), DomainError);
  EXPECT_THROW(ols_fit({1, 2}, {1, 2}), DomainError);
  EXPECT_THROW(ols_fit({1, 2, 3}, {1, 2}), ShapeError);
}

TEST(StudentT, CdfAndQuantileAgainstReference) {
  for (double df : {1.0, 2.0, 3.0, 7.5, 30.0, 1000.0}) {
    boost::math::students_t dist(df);
    for (double t : {-50.0, -4.0, -1.0, -0.1, -1e-9, 0.0, 1e-12, 0.3, 2.0, 12.0}) {
      const double ref = boost::math::cdf(dist, t);
      EXPECT_NEAR(student_t_cdf(t, df), ref, 1e-12 + 1e-10 * ref) << "df " << df << " t " << t;
    }
    for (double p : {0.001, 0.025, 0.5, 0.9, 0.975, 0.9995}) {
      const double ref = boost::math::quantile(dist, p);
      EXPECT_NEAR(student_t_quantile(p, df), ref, 1e-8 * std::max(1.0, std::abs(ref))) << "df " << df << " p " << p;
    }
  }
  EXPECT_THROW(student_t_quantile(0.0, 3.0), DomainError);
  EXPECT_THROW(student_t_quantile(1.0, 3.0), DomainError);
}

TEST(IncompleteBeta, AgainstReference) {
  for (double a : {0.5, 1.0, 2.5, 15.0}) {
    for (double b : {0.5, 3.0, 40.0}) {
      for (double x : {0.0, 0.01, 0.3, 0.5, 0.8, 0.999, 1.0}) {
        EXPECT_NEAR(regularized_incomplete_beta(x, a, b), boost::math::ibeta(a, b, x), 1e-12)
            << "a " << a << " b " << b << " x " << x;
      }
    }
  }
}
