#pragma once

#include <complex>
#include <deque>
#include <utility>
#include <stdexcept>
#include <string>
#include <vector>

#include "nclab/tensor.hpp"

namespace nclab {

struct OraclePoint {
  long t = 0;
  double alpha = 0.0;
};

struct OracleTrajectory {
  std::string kind;
  double lr = 0.0;
  double weight_decay = 0.0;
  double momentum = 0.0;
  int num_classes = 0;
  double alpha0 = 0.0;
  std::vector<OraclePoint> points;
  std::vector<double> lrs;  // learning rate used for the step leaving point t (decay runs only)

  double peak() const;
  std::size_t peak_index() const;
};

/// Step budget exhausted; the partial trajectory is kept.
struct OracleTimeout : std::runtime_error {
  OracleTimeout(const std::string& what, OracleTrajectory partial)
      : std::runtime_error(what), trajectory(std::move(partial)) {}
  OracleTrajectory trajectory;
};

// --- SGD with decoupled decay ------------------------------------------------

/// alpha_t = (1 - lr wd)^(2t) alpha_0.
double alpha_sgd_decoupled(long t, double alpha0, double lr, double wd);

// --- SGD with coupled decay ----------------------------------------------------

/// Roots of r^2 - (1 + beta - lr wd) r + beta.
struct CharRoots {
  double linear = 0.0;    // 1 + beta - lr wd
  double constant = 0.0;  // beta
  std::complex<double> r_plus;
  std::complex<double> r_minus;
  double spectral_radius = 0.0;
  bool complex_pair = false;

  /// |p(r)| for a candidate root.
  double residual(std::complex<double> r) const;
};

CharRoots char_roots(double momentum, double lr, double wd);

/// m_0 .. m_steps of m_{t+1} = (1 + beta - lr wd) m_t - beta m_{t-1}, m_1 = (1 - lr wd) m_0.
std::vector<DenseVector> rowsum_recursion_coupled(const DenseVector& m0, double lr, double momentum, double wd,
                                                  long steps);

/// alpha_t = (1/K) ||m_t||^2 along the recursion.
std::vector<double> alpha_from_rowsums(const std::vector<DenseVector>& rowsums);

// --- SignGD on the fixed-feature UFM ---------------------------------------------

/// ((K-2)^2 / wd^2) (1 - (1 - lr wd)^t)^2.
double alpha_signgd_decoupled(long t, int num_classes, double lr, double wd);
/// (K-2)^2 / wd^2.
double alpha_signgd_decoupled_limit(int num_classes, double wd);

/// W_t = (a+b) I - b J under coupled SignGD with H = M*.
struct CoupledSignState {
  double a = 0.0;
  double b = 0.0;
  double psi = 0.0;     // psi at (a, b)
  int phase = 1;        // 1: both grow, 2: b oscillates, 3: a oscillates too
  double lr = 0.0;      // step size used to reach this state
  int last_sign_a = 0;  // sign of the a-argument at the previous step
  int last_sign_b = 0;
  bool a_flipped = false;
  bool b_flipped = false;
  long t = 0;

  /// (a - (K-1) b)^2, equal to (1/K)||W^T 1||^2 for the reconstructed W.
  double alpha(int num_classes) const;
};

/// psi = 1 / (N sqrt(K-1) (exp((a+b)/sqrt(K-1)) + K - 1)), the magnitude of the
/// off-diagonal CE gradient entries at W = (a+b) I - b J, H = M*.
double coupled_signgd_psi(double a, double b, int num_classes, int num_samples);

/// Sign arguments ((K-1) psi - wd a, psi - wd b) at the given state.
std::pair<double, double> coupled_signgd_arguments(const CoupledSignState& s, int num_classes, int num_samples,
                                                   double wd);

CoupledSignState coupled_signgd_scalar_step(const CoupledSignState& state, int num_classes, int num_samples,
                                            double lr, double wd);

/// Detects sustained sign oscillation in a set of channels: fires when every
/// channel has flipped at least once within the last `window` observations.
class OscillationDetector {
 public:
  explicit OscillationDetector(std::size_t window = 4) : window_(window) {}

  /// Feeds the current per-channel signs; returns true when a decay should fire.
  /// The history is cleared after firing.
  bool observe(const std::vector<int>& signs);
  void reset();

 private:
  std::size_t window_;
  std::vector<int> previous_;
  std::deque<std::vector<bool>> flips_;
};

/// Stop rule shared by the scalar oracle and the matrix harness:
/// alpha <= tol * peak and (K lr)^2 <= tol * peak.
bool oscillation_run_converged(double alpha, double peak, double lr, int num_classes, double tol);

OracleTrajectory coupled_signgd_run_with_decay(int num_classes, int num_samples, double lr0, double wd,
                                               double shrink, double tol, long max_steps = 100000);

// --- Lemma-level identities ------------------------------------------------------

struct IncrementDecomposition {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// One coupled step from (W, V) with gradient G; returns (alpha_{t+1} - alpha_t)/lr
/// and -2 beta omega - 2 gamma - 2 wd alpha + lr nu computed through J_hat.
IncrementDecomposition alpha_increment_decomposition(const DenseMatrix& w, const DenseMatrix& v,
                                                     const DenseMatrix& g, double lr, double momentum, double wd);

/// Closed-form solution of alpha'(t) = -wd * int_0^t beta^(t-s) alpha(s) ds, alpha(0) = alpha0.
double ode_alpha_closed_form(double t, double alpha0, double wd, double beta);
/// C alpha0 exp(-wd t / log(1/beta)); requires 2 wd / log(1/beta) < 1.
double ode_alpha_bound(double t, double alpha0, double wd, double beta, double constant);
/// Smallest C with alpha(t) <= C alpha0 exp(-wd t / log(1/beta)) for all t >= 0, the
/// supremum of the ratio in closed form for real, repeated and complex roots. Throws
/// DomainError for complex or repeated roots with wd > log(1/beta)^2 / 2, where no finite C exists.
double ode_bound_constant(double wd, double beta);

struct OdeRoots {
  std::complex<double> r1;
  std::complex<double> r2;
};
OdeRoots ode_roots(double wd, double beta);

}  // namespace nclab
