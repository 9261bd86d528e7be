#include "nclab/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "nclab/errors.hpp"

namespace nclab {

namespace {

int sign_of(double x) { return (0.0 < x) - (x < 0.0); }

}  // namespace

double OracleTrajectory::peak() const {
  double p = 0.0;
  for (const auto& pt : points) p = std::max(p, pt.alpha);
  return p;
}

std::size_t OracleTrajectory::peak_index() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].alpha > points[best].alpha) best = i;
  }
  return best;
}

double alpha_sgd_decoupled(long t, double alpha0, double lr, double wd) {
  if (t < 0) throw DomainError("alpha_sgd_decoupled: negative step");
  return std::pow(1.0 - lr * wd, 2.0 * static_cast<double>(t)) * alpha0;
}

double CharRoots::residual(std::complex<double> r) const { return std::abs(r * r - linear * r + constant); }

CharRoots char_roots(double momentum, double lr, double wd) {
  CharRoots c;
  c.linear = 1.0 + momentum - lr * wd;
  c.constant = momentum;
  const double disc = c.linear * c.linear - 4.0 * c.constant;
  if (disc >= 0) {
    const double s = std::sqrt(disc);
    // Stable pair: the larger-magnitude root directly, the other from the product.
    const double big = c.linear >= 0 ? (c.linear + s) / 2.0 : (c.linear - s) / 2.0;
    const double small = big != 0.0 ? c.constant / big : (c.linear - big);
    c.r_plus = std::max(big, small);
    c.r_minus = std::min(big, small);
    c.complex_pair = false;
  } else {
    const double im = std::sqrt(-disc) / 2.0;
    c.r_plus = {c.linear / 2.0, im};
    c.r_minus = {c.linear / 2.0, -im};
    c.complex_pair = true;
  }
  c.spectral_radius = std::max(std::abs(c.r_plus), std::abs(c.r_minus));
  return c;
}

std::vector<DenseVector> rowsum_recursion_coupled(const DenseVector& m0, double lr, double momentum, double wd,
                                                  long steps) {
  if (steps < 1) throw DomainError("rowsum_recursion_coupled: need at least one step");
  std::vector<DenseVector> m;
  m.reserve(static_cast<std::size_t>(steps) + 1);
  m.push_back(m0);
  m.push_back((1.0 - lr * wd) * m0);
  const double c1 = 1.0 + momentum - lr * wd;
  for (long t = 1; t < steps; ++t) {
    m.push_back(c1 * m[t] - momentum * m[t - 1]);
  }
  return m;
}

std::vector<double> alpha_from_rowsums(const std::vector<DenseVector>& rowsums) {
  std::vector<double> out;
  out.reserve(rowsums.size());
  for (const auto& m : rowsums) out.push_back(m.squaredNorm() / static_cast<double>(m.size()));
  return out;
}

double alpha_signgd_decoupled_limit(int num_classes, double wd) {
  if (!(wd > 0)) throw DomainError("alpha_signgd_decoupled: weight decay must be positive");
  const double k2 = static_cast<double>(num_classes - 2);
  return k2 * k2 / (wd * wd);
}

double alpha_signgd_decoupled(long t, int num_classes, double lr, double wd) {
  const double limit = alpha_signgd_decoupled_limit(num_classes, wd);
  if (t < 0) throw DomainError("alpha_signgd_decoupled: negative step");
  const double gap = 1.0 - std::pow(1.0 - lr * wd, static_cast<double>(t));
  return limit * gap * gap;
}

double CoupledSignState::alpha(int num_classes) const {
  const double s = a - (num_classes - 1) * b;
  return s * s;
}

double coupled_signgd_psi(double a, double b, int num_classes, int num_samples) {
  const double root = std::sqrt(static_cast<double>(num_classes - 1));
  return 1.0 / (num_samples * root * (std::exp((a + b) / root) + (num_classes - 1)));
}

std::pair<double, double> coupled_signgd_arguments(const CoupledSignState& s, int num_classes, int num_samples,
                                                   double wd) {
  const double psi = coupled_signgd_psi(s.a, s.b, num_classes, num_samples);
  return {(num_classes - 1) * psi - wd * s.a, psi - wd * s.b};
}

CoupledSignState coupled_signgd_scalar_step(const CoupledSignState& state, int num_classes, int num_samples,
                                            double lr, double wd) {
  const auto [arg_a, arg_b] = coupled_signgd_arguments(state, num_classes, num_samples, wd);
  const int sa = sign_of(arg_a);
  const int sb = sign_of(arg_b);

  CoupledSignState next = state;
  next.a = state.a + lr * sa;
  next.b = state.b + lr * sb;
  next.lr = lr;
  next.t = state.t + 1;
  if (state.t > 0) {
    next.a_flipped = state.a_flipped || sa != state.last_sign_a;
    next.b_flipped = state.b_flipped || sb != state.last_sign_b;
  }
  next.last_sign_a = sa;
  next.last_sign_b = sb;
  next.phase = next.a_flipped ? 3 : (next.b_flipped ? 2 : 1);
  next.psi = coupled_signgd_psi(next.a, next.b, num_classes, num_samples);
  return next;
}

bool OscillationDetector::observe(const std::vector<int>& signs) {
  std::vector<bool> flipped(signs.size(), false);
  if (previous_.size() == signs.size()) {
    for (std::size_t i = 0; i < signs.size(); ++i) flipped[i] = signs[i] != previous_[i];
  }
  previous_ = signs;
  flips_.push_back(std::move(flipped));
  while (flips_.size() > window_) flips_.pop_front();

  for (std::size_t i = 0; i < signs.size(); ++i) {
    const bool any = std::any_of(flips_.begin(), flips_.end(), [i](const std::vector<bool>& f) { return f[i]; });
    if (!any) return false;
  }
  flips_.clear();
  return !signs.empty();
}

void OscillationDetector::reset() {
  previous_.clear();
  flips_.clear();
}

bool oscillation_run_converged(double alpha, double peak, double lr, int num_classes, double tol) {
  if (!(peak > 0)) return false;
  const double kl = num_classes * lr;
  return alpha <= tol * peak && kl * kl <= tol * peak;
}

OracleTrajectory coupled_signgd_run_with_decay(int num_classes, int num_samples, double lr0, double wd,
                                               double shrink, double tol, long max_steps) {
  if (!(shrink > 0 && shrink < 1)) throw DomainError("coupled_signgd_run_with_decay: shrink must lie in (0, 1)");
  if (!(tol > 0)) throw DomainError("coupled_signgd_run_with_decay: tol must be positive");
  if (!(wd > 0) || !(lr0 > 0)) throw DomainError("coupled_signgd_run_with_decay: lr and wd must be positive");

  OracleTrajectory traj;
  traj.kind = "signgd_coupled_decay";
  traj.lr = lr0;
  traj.weight_decay = wd;
  traj.num_classes = num_classes;
  traj.alpha0 = 0.0;
  traj.points.push_back({0, 0.0});

  CoupledSignState state;
  state.psi = coupled_signgd_psi(0.0, 0.0, num_classes, num_samples);
  OscillationDetector detector;
  double lr = lr0;
  double peak = 0.0;
  for (long t = 0; t < max_steps; ++t) {
    traj.lrs.push_back(lr);
    state = coupled_signgd_scalar_step(state, num_classes, num_samples, lr, wd);
    const double alpha = state.alpha(num_classes);
    traj.points.push_back({state.t, alpha});
    peak = std::max(peak, alpha);
    if (detector.observe({state.last_sign_a, state.last_sign_b})) lr *= shrink;
    if (oscillation_run_converged(alpha, peak, lr, num_classes, tol)) return traj;
  }
  throw OracleTimeout("coupled_signgd_run_with_decay: no convergence within " + std::to_string(max_steps) +
                          " steps (phase " + std::to_string(state.phase) + " reached)",
                      std::move(traj));
}

IncrementDecomposition alpha_increment_decomposition(const DenseMatrix& w, const DenseMatrix& v,
                                                     const DenseMatrix& g, double lr, double momentum, double wd) {
  if (w.rows() != v.rows() || w.cols() != v.cols() || w.rows() != g.rows() || w.cols() != g.cols()) {
    throw ShapeError("alpha_increment_decomposition: W, V and G must share a shape");
  }
  const Eigen::Index k = w.rows();
  const DenseMatrix j_hat = DenseMatrix::Constant(k, k, 1.0 / static_cast<double>(k));
  auto inner = [&](const DenseMatrix& c) { return c.cwiseProduct(j_hat).sum(); };

  const DenseMatrix v_next = momentum * v + g + wd * w;
  const DenseMatrix w_next = w - lr * v_next;

  auto alpha_of = [](const DenseMatrix& m) {
    return m.colwise().sum().squaredNorm() / static_cast<double>(m.rows());
  };
  IncrementDecomposition out;
  out.lhs = (alpha_of(w_next) - alpha_of(w)) / lr;

  const double omega = inner(v * w.transpose());
  const double gamma = inner(g * w.transpose());
  const double alpha = inner(w * w.transpose());
  const double nu = inner(v_next * v_next.transpose());
  out.rhs = -2.0 * momentum * omega - 2.0 * gamma - 2.0 * wd * alpha + lr * nu;
  return out;
}

OdeRoots ode_roots(double wd, double beta) {
  const double log_beta = std::log(beta);
  const std::complex<double> s = std::sqrt(std::complex<double>(log_beta * log_beta - 4.0 * wd, 0.0));
  return {(log_beta + s) / 2.0, (log_beta - s) / 2.0};
}

namespace {

void check_ode_params(double wd, double beta, const char* op) {
  if (!(beta > 0 && beta < 1)) throw DomainError(std::string(op) + ": beta must lie in (0, 1)");
  if (!(wd > 0)) throw DomainError(std::string(op) + ": weight decay must be positive");
}

}  // namespace

double ode_alpha_closed_form(double t, double alpha0, double wd, double beta) {
  check_ode_params(wd, beta, "ode_alpha_closed_form");
  if (t < 0) throw DomainError("ode_alpha_closed_form: negative time");
  const double log_beta = std::log(beta);
  const double disc = log_beta * log_beta - 4.0 * wd;
  if (disc > 0) {
    const double s = std::sqrt(disc);
    const double r1 = (log_beta + s) / 2.0;
    const double r2 = (log_beta - s) / 2.0;
    const double a = r2 / (r2 - r1);
    const double b = -r1 / (r2 - r1);
    return alpha0 * (a * std::exp(r1 * t) + b * std::exp(r2 * t));
  }
  const double sigma = log_beta / 2.0;
  if (disc == 0) return alpha0 * std::exp(sigma * t) * (1.0 - sigma * t);
  // Conjugate pair sigma +- i omega; alpha'(0) = 0 fixes the sine coefficient.
  const double omega = std::sqrt(-disc) / 2.0;
  return alpha0 * std::exp(sigma * t) * (std::cos(omega * t) - (sigma / omega) * std::sin(omega * t));
}

double ode_alpha_bound(double t, double alpha0, double wd, double beta, double constant) {
  check_ode_params(wd, beta, "ode_alpha_bound");
  const double log_inv_beta = -std::log(beta);
  if (!(2.0 * wd / log_inv_beta < 1.0)) throw DomainError("ode_alpha_bound: requires 2 wd / log(1/beta) < 1");
  return constant * alpha0 * std::exp(-wd * t / log_inv_beta);
}

double ode_bound_constant(double wd, double beta) {
  check_ode_params(wd, beta, "ode_bound_constant");
  const double l = -std::log(beta);
  const double rate = wd / l;
  const double disc = l * l - 4.0 * wd;
  if (disc > 0) {
    // alpha/alpha0 * e^{rate t} = A e^{a t} + B e^{b t} with A > 0 > B, 0 >= a > b.
    const double s = std::sqrt(disc);
    const double r1 = (-l + s) / 2.0;
    const double r2 = (-l - s) / 2.0;
    const double big_a = r2 / (r2 - r1);
    const double big_b = -r1 / (r2 - r1);
    const double a = r1 + rate;
    const double b = r2 + rate;
    if (a >= 0) return big_a;
    const double t = std::log(-big_b * b / (big_a * a)) / (a - b);
    return big_a * std::exp(a * t) + big_b * std::exp(b * t);
  }
  // Complex or repeated roots decay at l/2, slower than the envelope once wd > l^2/2.
  if (2.0 * wd > l * l) {
    throw DomainError("ode_bound_constant: no finite constant, alpha decays at rate log(1/beta)/2 < wd/log(1/beta)");
  }
  const double sigma = -l / 2.0;
  const double delta = sigma + rate;
  if (disc == 0) return std::exp((delta - sigma) / sigma) * (sigma / delta);  // e^{delta t}(1 - sigma t)
  // e^{delta t}(cos wt - (sigma/w) sin wt) peaks at the first zero of its derivative.
  const double omega = std::sqrt(-disc) / 2.0;
  const double t = std::atan2((delta - sigma) * omega, omega * omega + delta * sigma) / omega;
  return std::exp(delta * t) * std::sqrt((omega * omega + sigma * sigma) / (omega * omega + delta * delta));
}

}  // namespace nclab
