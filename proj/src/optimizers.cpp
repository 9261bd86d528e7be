#include "nclab/optimizers.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace nclab {

namespace {

constexpr std::array<std::pair<OptimizerKind, std::string_view>, 9> kKindNames{{
    {OptimizerKind::SgdCoupled, "sgd_coupled"},
    {OptimizerKind::SgdDecoupled, "sgd_decoupled"},
    {OptimizerKind::SignGdCoupled, "signgd_coupled"},
    {OptimizerKind::SignGdDecoupled, "signgd_decoupled"},
    {OptimizerKind::Signum, "signum"},
    {OptimizerKind::SignumW, "signum_w"},
    {OptimizerKind::Adam, "adam"},
    {OptimizerKind::AdamW, "adam_w"},
    {OptimizerKind::AdamInterpolated, "adam_interpolated"},
}};

constexpr std::array<std::pair<ScheduleKind, std::string_view>, 3> kScheduleNames{{
    {ScheduleKind::Constant, "constant"},
    {ScheduleKind::StepDecay, "step_decay"},
    {ScheduleKind::OscillationDecay, "oscillation_decay"},
}};

bool purely_coupled(OptimizerKind k) {
  return k == OptimizerKind::SgdCoupled || k == OptimizerKind::SignGdCoupled || k == OptimizerKind::Signum ||
         k == OptimizerKind::Adam;
}

bool purely_decoupled(OptimizerKind k) {
  return k == OptimizerKind::SgdDecoupled || k == OptimizerKind::SignGdDecoupled ||
         k == OptimizerKind::SignumW || k == OptimizerKind::AdamW;
}

}  // namespace

std::string to_string(OptimizerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return std::string(name);
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  throw DomainError("unknown optimizer kind '" + std::string(name) + "'");
}

std::string to_string(ScheduleKind kind) {
  for (const auto& [k, name] : kScheduleNames) {
    if (k == kind) return std::string(name);
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  for (const auto& [k, n] : kScheduleNames) {
    if (n == name) return k;
  }
  throw DomainError("unknown learning-rate schedule '" + std::string(name) + "'");
}

std::vector<int> milestone_epochs(const LRSchedule& schedule, int total_epochs) {
  std::vector<int> out;
  out.reserve(schedule.milestone_fractions.size());
  for (double f : schedule.milestone_fractions) {
    // 1e-9 absorbs the representation error of fractions like 1/3 (300/3 = 99.999...).
    out.push_back(static_cast<int>(std::floor(f * total_epochs + 1e-9)));
  }
  return out;
}

double lr_at(const LRSchedule& schedule, int epoch, int total_epochs, int decay_events) {
  if (epoch < 0 || epoch >= total_epochs) {
    throw DomainError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) +
                      ")");
  }
  switch (schedule.kind) {
    case ScheduleKind::Constant:
      return schedule.base_lr;
    case ScheduleKind::StepDecay: {
      double lr = schedule.base_lr;
      for (int m : milestone_epochs(schedule, total_epochs)) {
        if (epoch >= m) lr /= schedule.decay_factor;
      }
      return lr;
    }
    case ScheduleKind::OscillationDecay:
      return schedule.base_lr * std::pow(schedule.shrink_factor, decay_events);
  }
  return schedule.base_lr;
}

void OptimizerConfig::validate() const {
  auto fail = [&](const std::string& msg) { throw DomainError(to_string(kind) + ": " + msg); };
  if (!(learning_rate > 0)) fail("learning rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) fail("beta2 must lie in [0, 1)");
  if (epsilon < 0) fail("epsilon must be non-negative");
  if (coupled_wd < 0 || decoupled_wd < 0) fail("weight decay must be non-negative");
  if (purely_coupled(kind) && decoupled_wd != 0) fail("coupled-only rule with non-zero decoupled_wd");
  if (purely_decoupled(kind) && coupled_wd != 0) fail("decoupled-only rule with non-zero coupled_wd");
  if (kind == OptimizerKind::AdamInterpolated && total_wd &&
      std::abs(coupled_wd + decoupled_wd - *total_wd) > 1e-12 * std::max(1.0, *total_wd)) {
    fail("coupled_wd + decoupled_wd must equal total_wd");
  }
  if (schedule.kind == ScheduleKind::StepDecay && !(schedule.decay_factor >= 1)) fail("decay factor below 1");
  if (schedule.kind == ScheduleKind::OscillationDecay &&
      !(schedule.shrink_factor > 0 && schedule.shrink_factor < 1)) {
    fail("shrink factor must lie in (0, 1)");
  }
}

std::vector<std::string> OptimizerConfig::stability_warnings() const {
  std::vector<std::string> out;
  const double lr = learning_rate;
  switch (kind) {
    case OptimizerKind::SgdDecoupled:
      if (decoupled_wd > 0 && !(lr * decoupled_wd < 2)) out.push_back("lr * wd >= 2: row sums do not decay");
      break;
    case OptimizerKind::SgdCoupled:
      if (coupled_wd > 0 && !(lr * coupled_wd < 2 * (1 + momentum))) {
        out.push_back("lr * wd >= 2 (1 + momentum): row-sum recursion is not contracting");
      }
      break;
    case OptimizerKind::SignGdDecoupled:
      if (decoupled_wd > 0 && !(lr * decoupled_wd < 1)) out.push_back("lr * wd >= 1: row-sum growth is not monotone");
      break;
    default:
      break;
  }
  return out;
}

}  // namespace nclab
