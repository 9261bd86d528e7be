#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nclab/tensor.hpp"

namespace nclab {

enum class OptimizerKind {
  SgdCoupled,
  SgdDecoupled,
  SignGdCoupled,
  SignGdDecoupled,
  Signum,
  SignumW,
  Adam,
  AdamW,
  AdamInterpolated,
};

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

enum class ScheduleKind { Constant, StepDecay, OscillationDecay };

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

struct LRSchedule {
  ScheduleKind kind = ScheduleKind::Constant;
  double base_lr = 0.01;
  double decay_factor = 10.0;
  std::vector<double> milestone_fractions{1.0 / 3.0, 2.0 / 3.0};
  double shrink_factor = 0.5;
};

/// Epoch indices at which a step-decay schedule divides the rate, floor(E * f).
std::vector<int> milestone_epochs(const LRSchedule& schedule, int total_epochs);

/// Learning rate in effect during `epoch`. For oscillation_decay the caller
/// counts the decay events it has signalled so far.
double lr_at(const LRSchedule& schedule, int epoch, int total_epochs, int decay_events = 0);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::SgdCoupled;
  double learning_rate = 0.01;
  double momentum = 0.0;  // beta, or beta1 for the Adam family
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double coupled_wd = 0.0;
  double decoupled_wd = 0.0;
  std::optional<double> total_wd;  // adam_interpolated: coupled + decoupled must equal this
  LRSchedule schedule;

  /// Throws DomainError on violated invariants.
  void validate() const;
  /// Parameter choices outside the stability ranges of the decay theorems.
  std::vector<std::string> stability_warnings() const;
};

/// Per-parameter buffers. Empty buffers are zero-initialised on first use.
template <typename Scalar>
struct OptimizerState {
  Matrix<Scalar> momentum;
  Matrix<Scalar> second_moment;
  long step = 0;
};

namespace detail {

template <typename Scalar>
Scalar sign(Scalar x) {
  return Scalar((Scalar(0) < x) - (x < Scalar(0)));
}

template <typename Scalar>
void check_shapes(const Matrix<Scalar>& param, const Matrix<Scalar>& grad, const char* op) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw ShapeError(std::string(op) + ": parameter " + shape_string(param.rows(), param.cols()) +
                     " vs gradient " + shape_string(grad.rows(), grad.cols()));
  }
}

template <typename Scalar>
void ensure_buffer(Matrix<Scalar>& buffer, const Matrix<Scalar>& like, const char* op) {
  if (buffer.size() == 0) {
    buffer = Matrix<Scalar>::Zero(like.rows(), like.cols());
  } else if (buffer.rows() != like.rows() || buffer.cols() != like.cols()) {
    throw ShapeError(std::string(op) + ": optimizer state does not match parameter shape");
  }
}

}  // namespace detail

/// V <- beta V + g;  W <- (1 - lr wd) W - lr V.
template <typename Scalar>
void step_sgd_decoupled(Matrix<Scalar>& param, const Matrix<Scalar>& grad, OptimizerState<Scalar>& state,
                        Scalar lr, Scalar momentum, Scalar wd) {
  detail::check_shapes(param, grad, "step_sgd_decoupled");
  detail::ensure_buffer(state.momentum, param, "step_sgd_decoupled");
  state.momentum = momentum * state.momentum + grad;
  param = (Scalar(1) - lr * wd) * param - lr * state.momentum;
  ++state.step;
}

/// V <- beta V + g + wd W;  W <- W - lr V.
template <typename Scalar>
void step_sgd_coupled(Matrix<Scalar>& param, const Matrix<Scalar>& grad, OptimizerState<Scalar>& state,
                      Scalar lr, Scalar momentum, Scalar wd) {
  detail::check_shapes(param, grad, "step_sgd_coupled");
  detail::ensure_buffer(state.momentum, param, "step_sgd_coupled");
  state.momentum = momentum * state.momentum + grad + wd * param;
  param -= lr * state.momentum;
  ++state.step;
}

/// W <- W - lr (sign(g) + wd W), with sign(0) = 0.
template <typename Scalar>
void step_signgd_decoupled(Matrix<Scalar>& param, const Matrix<Scalar>& grad, OptimizerState<Scalar>& state,
                           Scalar lr, Scalar wd) {
  detail::check_shapes(param, grad, "step_signgd_decoupled");
  param = param - lr * (grad.unaryExpr(&detail::sign<Scalar>) + wd * param);
  ++state.step;
}

/// W <- W - lr sign(g + wd W).
template <typename Scalar>
void step_signgd_coupled(Matrix<Scalar>& param, const Matrix<Scalar>& grad, OptimizerState<Scalar>& state,
                         Scalar lr, Scalar wd) {
  detail::check_shapes(param, grad, "step_signgd_coupled");
  param = param - lr * (grad + wd * param).unaryExpr(&detail::sign<Scalar>);
  ++state.step;
}

/// Sign of a dampened momentum buffer. Coupled decay enters the buffer,
/// decoupled decay shrinks the parameter directly.
template <typename Scalar>
void step_signum(Matrix<Scalar>& param, const Matrix<Scalar>& grad, OptimizerState<Scalar>& state, Scalar lr,
                 Scalar momentum, Scalar wd, bool coupled) {
  detail::check_shapes(param, grad, "step_signum");
  if (!(momentum >= Scalar(0) && momentum < Scalar(1))) throw DomainError("step_signum: momentum outside [0, 1)");
  detail::ensure_buffer(state.momentum, param, "step_signum");
  if (coupled) {
    state.momentum = momentum * state.momentum + (Scalar(1) - momentum) * (grad + wd * param);
    param = param - lr * state.momentum.unaryExpr(&detail::sign<Scalar>);
  } else {
    state.momentum = momentum * state.momentum + (Scalar(1) - momentum) * grad;
    param = param - lr * (state.momentum.unaryExpr(&detail::sign<Scalar>) + wd * param);
  }
  ++state.step;
}

/// Adam with both a coupled (L2-in-gradient) and a decoupled (AdamW-style)
/// decay term; either may be zero. With beta2 = eps = 0 the step direction is
/// m_hat / |g| (zero where g = 0), which for beta1 = 0 is exactly sign(g).
template <typename Scalar>
void step_adam_family(Matrix<Scalar>& param, const Matrix<Scalar>& grad, OptimizerState<Scalar>& state,
                      Scalar lr, Scalar beta1, Scalar beta2, Scalar eps, Scalar coupled_wd, Scalar decoupled_wd) {
  detail::check_shapes(param, grad, "step_adam_family");
  if (!(beta1 >= Scalar(0) && beta1 < Scalar(1) && beta2 >= Scalar(0) && beta2 < Scalar(1))) {
    throw DomainError("step_adam_family: betas outside [0, 1)");
  }
  if (eps < Scalar(0)) throw DomainError("step_adam_family: negative epsilon");
  detail::ensure_buffer(state.momentum, param, "step_adam_family");
  detail::ensure_buffer(state.second_moment, param, "step_adam_family");

  const Matrix<Scalar> g = grad + coupled_wd * param;
  state.momentum = beta1 * state.momentum + (Scalar(1) - beta1) * g;
  state.second_moment = beta2 * state.second_moment + (Scalar(1) - beta2) * g.cwiseAbs2();
  ++state.step;

  const Scalar t = Scalar(state.step);
  const Matrix<Scalar> m_hat = state.momentum / (Scalar(1) - std::pow(beta1, t));
  Matrix<Scalar> direction(param.rows(), param.cols());
  if (beta2 == Scalar(0) && eps == Scalar(0)) {
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      direction(i) = g(i) == Scalar(0) ? Scalar(0) : m_hat(i) / std::abs(g(i));
    }
  } else {
    const Matrix<Scalar> v_hat = state.second_moment / (Scalar(1) - std::pow(beta2, t));
    const Matrix<Scalar> denom = (v_hat.array().sqrt() + eps).matrix();
    if ((denom.array() == Scalar(0)).any()) {
      throw NumericError("step_adam_family: zero denominator (eps = 0 with vanishing second moment)");
    }
    direction = m_hat.cwiseQuotient(denom);
  }
  param = param - lr * (direction + decoupled_wd * param);
}

/// Applies the update rule selected by `config` at learning rate `lr`.
template <typename Scalar>
void optimizer_step(const OptimizerConfig& config, Scalar lr, Matrix<Scalar>& param, const Matrix<Scalar>& grad,
                    OptimizerState<Scalar>& state) {
  const Scalar beta = Scalar(config.momentum);
  const Scalar wd_c = Scalar(config.coupled_wd);
  const Scalar wd_d = Scalar(config.decoupled_wd);
  switch (config.kind) {
    case OptimizerKind::SgdCoupled: return step_sgd_coupled(param, grad, state, lr, beta, wd_c);
    case OptimizerKind::SgdDecoupled: return step_sgd_decoupled(param, grad, state, lr, beta, wd_d);
    case OptimizerKind::SignGdCoupled: return step_signgd_coupled(param, grad, state, lr, wd_c);
    case OptimizerKind::SignGdDecoupled: return step_signgd_decoupled(param, grad, state, lr, wd_d);
    case OptimizerKind::Signum: return step_signum(param, grad, state, lr, beta, wd_c, true);
    case OptimizerKind::SignumW: return step_signum(param, grad, state, lr, beta, wd_d, false);
    case OptimizerKind::Adam:
    case OptimizerKind::AdamW:
    case OptimizerKind::AdamInterpolated:
      return step_adam_family(param, grad, state, lr, beta, Scalar(config.beta2), Scalar(config.epsilon), wd_c, wd_d);
  }
}

}  // namespace nclab
