// Acceptance suite: one PASS/FAIL line per criterion. Exit 0 when all pass, 2 otherwise.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

#include "nclab/harness.hpp"
#include "nclab/metrics.hpp"
#include "nclab/models.hpp"
#include "nclab/optimizers.hpp"
#include "nclab/oracles.hpp"
#include "nclab/stats.hpp"

using namespace nclab;

namespace {

// Tolerances.
constexpr double kTheorem1Rel = 1e-9;
constexpr double kTheorem1Seconds = 10.0;
constexpr double kTheorem2Abs = 1e-9;
constexpr double kTheorem2Decay = 1e-6;
constexpr double kTheorem2Seconds = 30.0;
constexpr double kTheorem3Rel = 1e-9;
constexpr double kTheorem4Ratio = 1e-6;
constexpr long kTheorem4Budget = 100000;
constexpr double kFamilyAbs = 1e-12;
constexpr double kColumnSumAbs = 1e-12;
constexpr double kIncrementAbs = 1e-10;
constexpr double kIntegralRel = 1e-4;
constexpr double kBoundSlack = 1e-12;
constexpr double kConstructionAbs = 1e-8;
constexpr double kScaleAbs = 1e-12;
constexpr double kExampleAbs = 1e-7;
constexpr double kOlsAbs = 1e-10;
constexpr double kTFRel = 1e-9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

DenseMatrix normal_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  DenseMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = d(rng);
  return m;
}

ExperimentConfig blob_mlp(OptimizerKind kind, double lr, double momentum, double wd, int epochs) {
  ExperimentConfig c;
  c.model.kind = ModelKind::Mlp;
  c.model.hidden_sizes = {16, 16};
  c.data.num_classes = 4;
  c.data.dim = 8;
  c.data.per_class = 25;
  c.epochs = epochs;
  c.optimizer.kind = kind;
  c.optimizer.learning_rate = lr;
  c.optimizer.schedule.base_lr = lr;
  c.optimizer.momentum = momentum;
  apply_weight_decay(c.optimizer, wd);
  return c;
}

Outcome theorem1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_training(blob_mlp(OptimizerKind::SgdDecoupled, 0.05, 0.9, 0.1, 300));
  const double secs = seconds_since(t0);
  double worst = 0.0;
  const double alpha0 = r.step_alphas.front();
  for (std::size_t t = 0; t < r.step_alphas.size(); ++t) {
    const double pred = alpha_sgd_decoupled(static_cast<long>(t), alpha0, 0.05, 0.1);
    worst = std::max(worst, std::abs(r.step_alphas[t] - pred) / pred);
  }
  return {worst <= kTheorem1Rel && secs < kTheorem1Seconds && r.steps == 300,
          "max rel err " + fmt(worst) + " over " + std::to_string(r.step_alphas.size()) + " epochs, " + fmt(secs) +
              " s"};
}

Outcome theorem2() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  for (double beta : {0.0, 0.5, 0.9}) {
    const auto r = run_training(blob_mlp(OptimizerKind::SgdCoupled, 0.05, beta, 0.1, 300));
    const auto pred = rowsum_recursion_coupled(r.rowsums.front(), 0.05, beta, 0.1, r.steps);
    double worst = 0.0;
    for (std::size_t t = 0; t < r.rowsums.size(); ++t) {
      worst = std::max(worst, (r.rowsums[t] - pred[t]).cwiseAbs().maxCoeff());
    }
    const double ratio = r.step_alphas.back() / r.step_alphas.front();
    const double rho = char_roots(beta, 0.05, 0.1).spectral_radius;
    ok = ok && worst <= kTheorem2Abs && ratio < kTheorem2Decay && rho < 1.0;
    detail += "beta " + fmt(beta) + ": rowsum err " + fmt(worst) + ", alpha_T/alpha_0 " + fmt(ratio) + ", rho " +
              fmt(rho) + "; ";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < kTheorem2Seconds;
  return {ok, detail + fmt(secs) + " s"};
}

ExperimentConfig fixed_ufm(OptimizerKind kind, int k, double lr, double wd, int epochs) {
  ExperimentConfig c;
  c.model.kind = ModelKind::UfmFixedFeatures;
  c.data.num_classes = k;
  c.data.per_class = 1;
  c.epochs = epochs;
  c.optimizer.kind = kind;
  c.optimizer.learning_rate = lr;
  c.optimizer.schedule.base_lr = lr;
  apply_weight_decay(c.optimizer, wd);
  return c;
}

Outcome theorem3() {
  const auto r = run_training(fixed_ufm(OptimizerKind::SignGdDecoupled, 10, 0.1, 0.5, 2000));
  double worst = 0.0;
  bool monotone = true;
  for (std::size_t t = 0; t < r.step_alphas.size(); ++t) {
    const double pred = alpha_signgd_decoupled(static_cast<long>(t), 10, 0.1, 0.5);
    const double err = std::abs(r.step_alphas[t] - pred);
    worst = std::max(worst, pred > 0 ? err / pred : err);
    if (t > 0 && r.step_alphas[t] < r.step_alphas[t - 1]) monotone = false;
  }
  const double last = r.step_alphas.back();
  const bool in_band = last >= 253.4 && last <= 256.0;
  return {worst <= kTheorem3Rel && monotone && in_band && r.steps == 2000,
          "max rel err " + fmt(worst) + ", monotone " + (monotone ? "yes" : "no") + ", final " +
              format_real(last) + " (limit " + format_real(alpha_signgd_decoupled_limit(10, 0.5)) + ")"};
}

Outcome theorem4() {
  auto c = fixed_ufm(OptimizerKind::SignGdCoupled, 10, 0.1, 0.5, static_cast<int>(kTheorem4Budget));
  c.optimizer.schedule.kind = ScheduleKind::OscillationDecay;
  c.optimizer.schedule.shrink_factor = 0.5;
  c.stop_alpha_ratio = kTheorem4Ratio;
  const int k = 10;
  double deviation = 0.0;
  const auto r = run_training(c, [&](const StepEvent& ev) {
    const DenseMatrix& w = *ev.w;
    const double a = w(0, 0);
    const double b = -w(0, 1);
    const DenseMatrix fit = (a + b) * DenseMatrix::Identity(k, k) - b * DenseMatrix::Ones(k, k);
    deviation = std::max(deviation, (w - fit).cwiseAbs().maxCoeff());
  });
  const auto& al = r.step_alphas;
  const auto peak_at = static_cast<std::size_t>(std::max_element(al.begin(), al.end()) - al.begin());
  const double peak = al[peak_at];
  const bool interior = peak_at > 0 && peak_at + 1 < al.size() && peak > al.front() && peak > al.back();
  const bool collapsed = al.back() < kTheorem4Ratio * peak;
  const bool ok = interior && collapsed && r.status == RunStatus::Converged && r.steps <= kTheorem4Budget &&
                  deviation <= kFamilyAbs;
  return {ok, "peak " + fmt(peak) + " at step " + std::to_string(peak_at) + ", final/peak " + fmt(al.back() / peak) +
                  " after " + std::to_string(r.steps) + " steps (" + std::to_string(r.decay_events) +
                  " decays), family deviation " + fmt(deviation)};
}

Outcome lemma_column_sums() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(2, 12);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = size(rng), p = size(rng), n = size(rng);
    std::uniform_int_distribution<int> label(0, k - 1);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = label(rng);
    const DenseMatrix w = normal_matrix(k, p, rng);
    const DenseMatrix x = normal_matrix(p, n, rng);
    const auto ce = ce_loss_and_grad(w, x, one_hot(labels, k));
    worst = std::max(worst, ce.grad_w.colwise().sum().cwiseAbs().maxCoeff());
  }
  return {worst < kColumnSumAbs, "max |1^T grad_W| " + fmt(worst) + " over 1000 instances"};
}

Outcome lemma_increment() {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> size(2, 10);
  std::uniform_real_distribution<double> lr(0.01, 0.5), beta(0.0, 0.99), wd(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = size(rng), p = size(rng);
    const DenseMatrix w = normal_matrix(k, p, rng);
    const DenseMatrix v = normal_matrix(k, p, rng);
    const DenseMatrix g = normal_matrix(k, p, rng);
    const auto d = alpha_increment_decomposition(w, v, g, lr(rng), beta(rng), wd(rng));
    worst = std::max(worst, std::abs(d.lhs - d.rhs));
  }
  return {worst < kIncrementAbs, "max |lhs - rhs| " + fmt(worst) + " over 1000 instances"};
}

// alpha'(t) by central difference against -wd * int_0^t beta^(t-s) alpha(s) ds by trapezoid.
double integral_residual(double t, double wd, double beta) {
  const double h = 1e-4;
  const double derivative =
      (ode_alpha_closed_form(t + h, 1.0, wd, beta) - ode_alpha_closed_form(t - h, 1.0, wd, beta)) / (2.0 * h);
  const int n = 20000;
  const double ds = t / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = i * ds;
    const double f = std::pow(beta, t - s) * ode_alpha_closed_form(s, 1.0, wd, beta);
    integral += (i == 0 || i == n) ? 0.5 * f : f;
  }
  integral *= ds;
  return std::abs(derivative + wd * integral) / (wd * integral);
}

Outcome lemma_ode() {
  bool ok = true;
  std::string detail;
  const double beta = 0.9;
  for (double wd : {0.001, 0.002}) {
    double worst_residual = 0.0;
    for (double t = 0.5; t <= 50.0; t += 0.5) worst_residual = std::max(worst_residual, integral_residual(t, wd, beta));
    const double c = ode_bound_constant(wd, beta);
    double worst_ratio = 0.0;
    for (double t = 0.0; t <= 50.0; t += 0.05) {
      worst_ratio = std::max(worst_ratio, ode_alpha_closed_form(t, 1.0, wd, beta) / ode_alpha_bound(t, 1.0, wd, beta, c));
    }
    ok = ok && worst_residual <= kIntegralRel && worst_ratio <= 1.0 + kBoundSlack;
    detail += "wd " + fmt(wd) + ": residual " + fmt(worst_residual) + ", C " + fmt(c) + ", max alpha/bound " +
              fmt(worst_ratio) + "; ";
  }
  return {ok, detail};
}

Outcome construction() {
  std::mt19937_64 rng(103);
  std::uniform_int_distribution<int> kd(3, 10);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  double worst = 0.0;
  bool nc4_exact = true;
  for (int trial = 0; trial < 50; ++trial) {
    const int k = kd(rng);
    const int p = std::uniform_int_distribution<int>(k, 2 * k)(rng);
    const auto sol = make_nc_solution(k, p, scale(rng), scale(rng), 1000 + trial);
    const LabeledFeatures<double> data{sol.H, sol.labels, k};
    const auto s = compute_class_statistics(data);
    worst = std::max({worst, nc0_metric(sol.W), nc2(s), nc3(sol.W, s)});
    nc4_exact = nc4_exact && nc4(sol.W, s, data) == 1.0;
  }
  return {worst < kConstructionAbs && nc4_exact,
          "max(nc0, nc2, nc3) " + fmt(worst) + ", nc4 == 1 " + (nc4_exact ? "always" : "not always")};
}

ClassStatistics<double> stats_from_means(const DenseMatrix& m) {
  ClassStatistics<double> s;
  s.class_means = m;
  s.centered_means = m;
  s.global_mean = DenseVector::Zero(m.rows());
  s.sigma_b = m * m.transpose() / static_cast<double>(m.cols());
  s.sigma_w = DenseMatrix::Zero(m.rows(), m.rows());
  return s;
}

DenseMatrix isometry(Eigen::Index p, Eigen::Index k, std::mt19937_64& rng) {
  Eigen::HouseholderQR<DenseMatrix> qr(normal_matrix(p, k, rng));
  return qr.householderQ() * DenseMatrix::Identity(p, k);
}

Outcome metric_suite() {
  std::vector<std::string> failures;
  auto expect = [&](const std::string& name, double got, double want) {
    if (!(std::abs(got - want) <= kExampleAbs)) failures.push_back(name + " = " + format_real(got));
  };
  DenseMatrix w1(2, 2), w2(2, 2);
  w1 << 1, 0, -1, 0;
  w2 << 1, -1, 2, -2;
  expect("nc0 cancel", nc0_metric(w1), 0.0);
  expect("nc0 hand", nc0_metric(w2), 2.1213203);
  expect("nc0 etf", nc0_metric(DenseMatrix(simplex_etf(6).transpose())), 0.0);
  expect("alpha cancel", nc0_alpha(w1), 0.0);
  expect("alpha hand", nc0_alpha(w2), 9.0);
  expect("alpha constant", nc0_alpha(DenseMatrix(DenseMatrix::Ones(3, 2))), 6.0);  // pKc^2 with K=3, p=2, c=1
  expect("normalized etf", nc0_normalized(DenseMatrix(2.5 * simplex_etf(5).transpose())), 0.0);
  expect("normalized hand", nc0_normalized(w2), 0.6708204);

  DenseMatrix sb = DenseMatrix::Zero(2, 2), sw = DenseMatrix::Zero(2, 2);
  sb(0, 0) = 1.0;
  sw(0, 0) = 0.5;
  sw(1, 1) = 7.0;
  auto s1 = stats_from_means(DenseMatrix::Zero(2, 2));
  s1.sigma_b = sb;
  s1.sigma_w = sw;
  expect("nc1 null direction", nc1(s1), 0.25);
  std::mt19937_64 rng(104);
  const DenseMatrix a = normal_matrix(4, 4, rng);
  auto s2 = stats_from_means(DenseMatrix::Zero(4, 4));
  s2.sigma_b = a * a.transpose();
  s2.sigma_w = s2.sigma_b;
  expect("nc1 full rank", nc1(s2), 1.0);
  s2.sigma_w.setZero();
  expect("nc1 collapsed", nc1(s2), 0.0);

  for (int k = 4; k <= 10; ++k) {
    const auto s = stats_from_means(isometry(k + 2, k, rng) * simplex_etf(k));
    expect("nc2 etf K=" + std::to_string(k), nc2(s), 0.0);
    expect("nc2n etf K=" + std::to_string(k), nc2_n(s), 0.0);
    expect("nc2a etf K=" + std::to_string(k), nc2_a(s), 0.0);
  }
  expect("nc2a orthonormal", equiangularity(DenseMatrix(DenseMatrix::Identity(5, 5))), 0.25);
  const DenseMatrix etf4 = simplex_etf(4);
  expect("nc2w etf", nc2w(DenseMatrix(3.0 * etf4)), 0.0);
  expect("nc2wn equal rows", nc2w_n(DenseMatrix(DenseMatrix::Ones(4, 3))), 0.0);
  expect("nc2m etf", nc2m(etf4, etf4), 0.0);
  const DenseMatrix m4 = isometry(4, 4, rng) * etf4;
  expect("nc3 self-dual", nc3(DenseMatrix(2.0 * m4.transpose()), m4), 0.0);
  const DenseMatrix mr = normal_matrix(4, 4, rng);
  expect("nc3 opposite", nc3(DenseMatrix(-mr.transpose()), mr), 0.125);

  // NC4: class means as test points, then a derangement on ETF means.
  {
    const DenseMatrix m = simplex_etf(5);
    std::vector<int> labels{0, 1, 2, 3, 4};
    const LabeledFeatures<double> data{m, labels, 5};
    const auto s = compute_class_statistics(data);
    expect("nc4 self", nc4(DenseMatrix(m.transpose()), s, data), 1.0);
    DenseMatrix deranged(5, 5);
    for (int k = 0; k < 5; ++k) deranged.row(k) = m.col((k + 1) % 5).transpose();
    expect("nc4 derangement", nc4(deranged, s, data), 0.0);
  }

  // Scale invariance of nc2, nc2w, nc3 over random inputs.
  double worst = 0.0;
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  std::uniform_int_distribution<int> kd(2, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = kd(rng);
    const int p = k + std::uniform_int_distribution<int>(0, 4)(rng);
    const DenseMatrix w = normal_matrix(k, p, rng);
    const DenseMatrix m = normal_matrix(p, k, rng);
    const double sa = scale(rng), sb2 = scale(rng);
    worst = std::max({worst, std::abs(nc2(stats_from_means(m)) - nc2(stats_from_means(DenseMatrix(sb2 * m)))),
                      std::abs(nc2w(w) - nc2w(DenseMatrix(sa * w))),
                      std::abs(nc3(w, m) - nc3(DenseMatrix(sa * w), DenseMatrix(sb2 * m)))});
  }
  if (!(worst <= kScaleAbs)) failures.push_back("scale invariance " + fmt(worst));

  std::string detail = failures.empty() ? "all examples within " + fmt(kExampleAbs) : "failed:";
  for (const auto& f : failures) detail += " " + f + ";";
  return {failures.empty(), detail + " scale invariance max diff " + fmt(worst)};
}

Outcome sign_reduction() {
  std::mt19937_64 rng(105);
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_real_distribution<double> lr(0.001, 1.0), wd(0.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int r = size(rng), c = size(rng);
    const DenseMatrix w = normal_matrix(r, c, rng);
    DenseMatrix g = normal_matrix(r, c, rng);
    if (trial % 7 == 0) g(0, 0) = 0.0;
    const double eta = lr(rng), lambda = wd(rng);

    DenseMatrix adam_c = w, sign_c = w, adam_d = w, sign_d = w;
    OptimizerState<double> s1, s2, s3, s4;
    step_adam_family(adam_c, g, s1, eta, 0.0, 0.0, 0.0, lambda, 0.0);
    step_signgd_coupled(sign_c, g, s2, eta, lambda);
    step_adam_family(adam_d, g, s3, eta, 0.0, 0.0, 0.0, 0.0, lambda);
    step_signgd_decoupled(sign_d, g, s4, eta, lambda);
    worst = std::max({worst, (adam_c - sign_c).cwiseAbs().maxCoeff(), (adam_d - sign_d).cwiseAbs().maxCoeff()});
  }
  return {worst == 0.0, "max abs diff " + fmt(worst) + " over 10000 pairs"};
}

Outcome weight_decay_direction() {
  SweepSpec spec;
  spec.base = blob_mlp(OptimizerKind::SgdCoupled, 0.05, 0.9, 0.0, 500);
  spec.lrs = {0.05};
  spec.momenta = {0.9};
  spec.weight_decays = {0.0, 0.005, 0.05};
  spec.kinds = {OptimizerKind::SgdCoupled};
  spec.derive_seeds = false;
  spec.accuracy_threshold = 0.0;
  const auto sweep = run_sweep(spec);
  std::vector<double> finals;
  bool ok = true;
  for (const auto& run : sweep.runs) {
    ok = ok && run.result.has_value();
    finals.push_back(run.result ? *run.result->final_record().metrics.nc0_alpha : NAN);
  }
  ok = ok && finals[1] < finals[0] && finals[2] < finals[1];
  std::string detail = "coupled SGD final alpha";
  for (double f : finals) detail += " " + fmt(f);

  const int k = 4;
  detail += "; decoupled SignGD final/floor";
  for (double wd : {0.05, 0.5, 1.0}) {
    const auto r = run_training(fixed_ufm(OptimizerKind::SignGdDecoupled, k, 0.1, wd, 2000));
    const double floor = 0.5 * (k - 2) * (k - 2) / (wd * wd);
    ok = ok && r.step_alphas.back() >= floor;
    detail += " " + fmt(r.step_alphas.back() / floor);
  }
  return {ok, detail};
}

Outcome regression() {
  const std::vector<std::vector<std::pair<double, double>>> fixtures{
      {{1, 1.1}, {2, 1.9}, {3, 3.0}, {4, 4.1}, {5, 4.9}},
      {{-2, 3.5}, {0.5, 1.25}, {1, 0.9}, {3, -1.7}, {7.5, -6.0}},
      {{0.1, 0.016}, {0.2, 0.035}, {0.35, 0.052}, {0.5, 0.081}, {0.8, 0.127}},
  };
  double worst = 0.0, worst_tf = 0.0;
  for (const auto& fx : fixtures) {
    std::vector<double> x, y;
    Eigen::MatrixXd design(fx.size(), 2);
    Eigen::VectorXd target(fx.size());
    for (std::size_t i = 0; i < fx.size(); ++i) {
      x.push_back(fx[i].first);
      y.push_back(fx[i].second);
      design(static_cast<Eigen::Index>(i), 0) = 1.0;
      design(static_cast<Eigen::Index>(i), 1) = fx[i].first;
      target(static_cast<Eigen::Index>(i)) = fx[i].second;
    }
    const Eigen::MatrixXd xtx = design.transpose() * design;
    const Eigen::VectorXd beta = xtx.ldlt().solve(design.transpose() * target);
    const Eigen::VectorXd resid = target - design * beta;
    const double sigma2 = resid.squaredNorm() / static_cast<double>(fx.size() - 2);
    const double se = std::sqrt(sigma2 * xtx.inverse()(1, 1));
    const auto fit = ols_fit(x, y);
    worst = std::max({worst, std::abs(fit.intercept - beta(0)), std::abs(fit.slope - beta(1)), std::abs(fit.se - se),
                      std::abs(fit.t_value - beta(1) / se)});
    worst_tf = std::max(worst_tf, std::abs(fit.t_value * fit.t_value - fit.f_statistic) / fit.f_statistic);
  }
  return {worst <= kOlsAbs && worst_tf <= kTFRel,
          "max coefficient/se/t diff " + fmt(worst) + ", max |t^2 - F|/F " + fmt(worst_tf)};
}

Outcome determinism() {
  auto c = blob_mlp(OptimizerKind::SgdCoupled, 0.05, 0.9, 0.005, 100);
  c.batch_size = 20;
  c.seed = 42;
  std::ostringstream a, b;
  write_records_csv(a, run_training(c).records);
  write_records_csv(b, run_training(c).records);
  const bool same = a.str() == b.str();
  return {same, std::string(same ? "identical" : "different") + " CSV (" + std::to_string(a.str().size()) + " bytes)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"decoupled SGD alpha decay", theorem1},
      {"coupled SGD row-sum recursion", theorem2},
      {"decoupled SignGD closed form", theorem3},
      {"coupled SignGD with decay", theorem4},
      {"CE gradient column sums", lemma_column_sums},
      {"alpha increment decomposition", lemma_increment},
      {"integral equation and bound", lemma_ode},
      {"collapsed construction", construction},
      {"metric sanity", metric_suite},
      {"Adam to SignGD reduction", sign_reduction},
      {"weight decay direction", weight_decay_direction},
      {"regression plumbing", regression},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& err) {
      o = {false, std::string("error: ") + err.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 2;
}
