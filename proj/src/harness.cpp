#include "nclab/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nclab/errors.hpp"
#include "nclab/models.hpp"
#include "nclab/oracles.hpp"

namespace nclab {

namespace {

constexpr std::array<std::pair<ModelKind, std::string_view>, 3> kModelNames{{
    {ModelKind::Ufm, "ufm"},
    {ModelKind::UfmFixedFeatures, "ufm_fixed_features"},
    {ModelKind::Mlp, "mlp"},
}};

bool purely_coupled(OptimizerKind k) {
  return k == OptimizerKind::SgdCoupled || k == OptimizerKind::SignGdCoupled || k == OptimizerKind::Signum ||
         k == OptimizerKind::Adam;
}

bool same_value(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

bool same_value(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_value(*a, *b);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_real(v[i]);
  return s;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

std::string to_string(ModelKind kind) {
  for (const auto& [k, name] : kModelNames) {
    if (k == kind) return std::string(name);
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto& [k, n] : kModelNames) {
    if (n == name) return k;
  }
  throw DomainError("unknown model kind '" + std::string(name) + "'");
}

bool ModelSpec::zero_init() const {
  if (init.empty()) return kind == ModelKind::UfmFixedFeatures;
  return init == "zero";
}

int ExperimentConfig::num_samples() const {
  return model.kind == ModelKind::UfmFixedFeatures ? data.num_classes : data.num_classes * data.per_class;
}

int ExperimentConfig::effective_batch_size() const { return batch_size == 0 ? num_samples() : batch_size; }

void ExperimentConfig::validate() const {
  if (epochs < 1) throw DomainError("config: epochs must be at least 1");
  if (data.num_classes < 2) throw DomainError("config: data.k must be at least 2");
  if (data.per_class < 1) throw DomainError("config: data.per_class must be positive");
  if (model.kind != ModelKind::UfmFixedFeatures && data.dim < 1) throw DomainError("config: data.d must be positive");
  if (!(data.margin > 0)) throw DomainError("config: data.margin must be positive");
  if (batch_size < 0 || batch_size > num_samples()) {
    throw DomainError("config: batch_size " + std::to_string(batch_size) + " outside [1, N = " +
                      std::to_string(num_samples()) + "]");
  }
  if (model.kind != ModelKind::Mlp && effective_batch_size() != num_samples()) {
    throw DomainError("config: UFM runs are full batch");
  }
  if (metric_period < 1) throw DomainError("config: train.metric_period must be positive");
  if (!model.init.empty() && model.init != "zero" && model.init != "gaussian") {
    throw DomainError("config: model.init must be 'zero' or 'gaussian'");
  }
  if (!(model.init_std > 0)) throw DomainError("config: model.init_std must be positive");
  if (!(stop_alpha_ratio > 0)) throw DomainError("config: train.stop_alpha_ratio must be positive");
  optimizer.validate();
}

namespace {

const std::set<std::string> kExperimentKeys{
    "optimizer.kind",     "optimizer.lr",         "optimizer.momentum",
    "optimizer.beta2",    "optimizer.eps",        "optimizer.coupled_wd",
    "optimizer.decoupled_wd", "optimizer.total_wd", "optimizer.schedule",
    "optimizer.milestone_fractions", "optimizer.decay_factor", "optimizer.shrink",
    "model.kind",         "model.hidden_sizes",   "model.init",
    "model.init_std",     "data.k",               "data.d",
    "data.per_class",     "data.seed",            "data.margin",
    "train.epochs",       "train.batch_size",     "train.seed",
    "train.metric_period", "train.output",        "train.stop_alpha_ratio",
};

const std::set<std::string> kSweepKeys{
    "sweep.lr", "sweep.momentum", "sweep.weight_decay", "sweep.kinds",
    "sweep.accuracy_threshold", "sweep.output_dir", "sweep.seed_mode", "sweep.threads",
};

}  // namespace

ExperimentConfig experiment_from_config(const KeyValueConfig& cfg, bool allow_sweep_keys) {
  auto known = kExperimentKeys;
  if (allow_sweep_keys) known.insert(kSweepKeys.begin(), kSweepKeys.end());
  cfg.require_known(known);

  ExperimentConfig c;
  auto& o = c.optimizer;
  o.kind = parse_optimizer_kind(cfg.get_string("optimizer.kind", to_string(o.kind)));
  o.learning_rate = cfg.get_double("optimizer.lr", o.learning_rate);
  o.momentum = cfg.get_double("optimizer.momentum", o.momentum);
  o.beta2 = cfg.get_double("optimizer.beta2", o.beta2);
  o.epsilon = cfg.get_double("optimizer.eps", o.epsilon);
  o.coupled_wd = cfg.get_double("optimizer.coupled_wd", 0.0);
  o.decoupled_wd = cfg.get_double("optimizer.decoupled_wd", 0.0);
  if (cfg.contains("optimizer.total_wd")) o.total_wd = cfg.get_double("optimizer.total_wd", 0.0);
  o.schedule.kind = parse_schedule_kind(cfg.get_string("optimizer.schedule", "constant"));
  o.schedule.base_lr = o.learning_rate;
  o.schedule.milestone_fractions = cfg.get_doubles("optimizer.milestone_fractions", o.schedule.milestone_fractions);
  o.schedule.decay_factor = cfg.get_double("optimizer.decay_factor", o.schedule.decay_factor);
  o.schedule.shrink_factor = cfg.get_double("optimizer.shrink", o.schedule.shrink_factor);

  c.model.kind = parse_model_kind(cfg.get_string("model.kind", "mlp"));
  c.model.hidden_sizes = cfg.get_ints("model.hidden_sizes", c.model.hidden_sizes);
  c.model.init = cfg.get_string("model.init", "");
  c.model.init_std = cfg.get_double("model.init_std", c.model.init_std);

  c.data.num_classes = static_cast<int>(cfg.get_long("data.k", c.data.num_classes));
  c.data.dim = static_cast<int>(cfg.get_long("data.d", c.data.dim));
  c.data.per_class = static_cast<int>(cfg.get_long("data.per_class", c.data.per_class));
  c.data.seed = cfg.get_u64("data.seed", c.data.seed);
  c.data.margin = cfg.get_double("data.margin", c.data.margin);

  c.epochs = static_cast<int>(cfg.get_long("train.epochs", c.epochs));
  c.batch_size = static_cast<int>(cfg.get_long("train.batch_size", c.batch_size));
  c.seed = cfg.get_u64("train.seed", c.seed);
  c.metric_period = static_cast<int>(cfg.get_long("train.metric_period", c.metric_period));
  c.output = cfg.get_string("train.output", "");
  c.stop_alpha_ratio = cfg.get_double("train.stop_alpha_ratio", c.stop_alpha_ratio);
  c.validate();
  return c;
}

KeyValueConfig to_key_values(const ExperimentConfig& c) {
  KeyValueConfig kv;
  const auto& o = c.optimizer;
  kv.set("optimizer.kind", to_string(o.kind));
  kv.set("optimizer.lr", format_real(o.learning_rate));
  kv.set("optimizer.momentum", format_real(o.momentum));
  kv.set("optimizer.beta2", format_real(o.beta2));
  kv.set("optimizer.eps", format_real(o.epsilon));
  kv.set("optimizer.coupled_wd", format_real(o.coupled_wd));
  kv.set("optimizer.decoupled_wd", format_real(o.decoupled_wd));
  if (o.total_wd) kv.set("optimizer.total_wd", format_real(*o.total_wd));
  kv.set("optimizer.schedule", to_string(o.schedule.kind));
  kv.set("optimizer.milestone_fractions", join_doubles(o.schedule.milestone_fractions));
  kv.set("optimizer.decay_factor", format_real(o.schedule.decay_factor));
  kv.set("optimizer.shrink", format_real(o.schedule.shrink_factor));
  kv.set("model.kind", to_string(c.model.kind));
  kv.set("model.hidden_sizes", join_ints(c.model.hidden_sizes));
  kv.set("model.init", c.model.zero_init() ? "zero" : "gaussian");
  kv.set("model.init_std", format_real(c.model.init_std));
  kv.set("data.k", std::to_string(c.data.num_classes));
  kv.set("data.d", std::to_string(c.data.dim));
  kv.set("data.per_class", std::to_string(c.data.per_class));
  kv.set("data.seed", std::to_string(c.data.seed));
  kv.set("data.margin", format_real(c.data.margin));
  kv.set("train.epochs", std::to_string(c.epochs));
  kv.set("train.batch_size", std::to_string(c.batch_size));
  kv.set("train.seed", std::to_string(c.seed));
  kv.set("train.metric_period", std::to_string(c.metric_period));
  kv.set("train.output", c.output);
  kv.set("train.stop_alpha_ratio", format_real(c.stop_alpha_ratio));
  return kv;
}

void apply_weight_decay(OptimizerConfig& config, double wd) {
  config.total_wd.reset();
  if (config.kind == OptimizerKind::AdamInterpolated) {
    config.coupled_wd = wd / 2.0;
    config.decoupled_wd = wd - config.coupled_wd;
    config.total_wd = wd;
  } else if (purely_coupled(config.kind)) {
    config.coupled_wd = wd;
    config.decoupled_wd = 0.0;
  } else {
    config.coupled_wd = 0.0;
    config.decoupled_wd = wd;
  }
}

double weight_decay_of(const OptimizerConfig& config) { return config.coupled_wd + config.decoupled_wd; }

// --- Records ---------------------------------------------------------------------

const char* const kRecordCsvHeader =
    "epoch,lr,train_loss,train_acc,nc0,nc0_alpha,nc0_normalized,nc1,nc2,nc2n,nc2a,nc2w,nc2wn,nc2wa,nc2m,nc3,nc4,"
    "sigma_min_w,sigma_avg_w,sigma_min_m,sigma_avg_m";

namespace {

using OptionalField = std::optional<double> MetricSuite::*;

const std::vector<std::pair<std::string, OptionalField>>& suite_fields() {
  static const std::vector<std::pair<std::string, OptionalField>> fields{
      {"nc0", &MetricSuite::nc0},   {"nc0_alpha", &MetricSuite::nc0_alpha}, {"nc0_normalized", &MetricSuite::nc0_normalized},
      {"nc1", &MetricSuite::nc1},   {"nc2", &MetricSuite::nc2},             {"nc2n", &MetricSuite::nc2n},
      {"nc2a", &MetricSuite::nc2a}, {"nc2w", &MetricSuite::nc2w},           {"nc2wn", &MetricSuite::nc2wn},
      {"nc2wa", &MetricSuite::nc2wa}, {"nc2m", &MetricSuite::nc2m},         {"nc3", &MetricSuite::nc3},
      {"nc4", &MetricSuite::nc4},
  };
  return fields;
}

using SigmaField = std::optional<double> MetricRecord::*;

const std::vector<std::pair<std::string, SigmaField>>& sigma_fields() {
  static const std::vector<std::pair<std::string, SigmaField>> fields{
      {"sigma_min_w", &MetricRecord::sigma_min_w},
      {"sigma_avg_w", &MetricRecord::sigma_avg_w},
      {"sigma_min_m", &MetricRecord::sigma_min_m},
      {"sigma_avg_m", &MetricRecord::sigma_avg_m},
  };
  return fields;
}

std::string cell(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::optional<double> parse_cell(const std::string& s, int line, const std::string& column) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw IoError("csv line " + std::to_string(line) + ": column " + column + ": '" + s + "' is not a number");
  }
  return v;
}

}  // namespace

bool operator==(const MetricRecord& a, const MetricRecord& b) {
  if (a.epoch != b.epoch || !same_value(a.lr, b.lr) || !same_value(a.train_loss, b.train_loss) ||
      !same_value(a.train_acc, b.train_acc)) {
    return false;
  }
  for (const auto& [name, field] : suite_fields()) {
    if (!same_value(a.metrics.*field, b.metrics.*field)) return false;
  }
  for (const auto& [name, field] : sigma_fields()) {
    if (!same_value(a.*field, b.*field)) return false;
  }
  return true;
}

std::optional<double> record_value(const MetricRecord& r, const std::string& column) {
  if (column == "epoch") return r.epoch;
  if (column == "lr") return r.lr;
  if (column == "train_loss") return r.train_loss;
  if (column == "train_acc") return r.train_acc;
  for (const auto& [name, field] : suite_fields()) {
    if (name == column) return r.metrics.*field;
  }
  for (const auto& [name, field] : sigma_fields()) {
    if (name == column) return r.*field;
  }
  throw DomainError("unknown metric column '" + column + "'");
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Converged: return "converged";
    case RunStatus::DidNotTrain: return "did_not_train";
    case RunStatus::NanAbort: return "nan_abort";
    case RunStatus::BudgetExhausted: return "budget_exhausted";
  }
  return "unknown";
}

const MetricRecord& TrainingResult::final_record() const {
  if (records.empty()) throw DomainError("training result has no records");
  return records.back();
}

// --- Training ----------------------------------------------------------------------

namespace {

struct Sigmas {
  std::optional<double> min, avg;
};

Sigmas sigma_summary(const DenseMatrix& m) {
  Sigmas s;
  if (m.size() == 0 || !m.allFinite()) return s;
  const DenseVector sv = singular_values(m);
  s.min = sv.minCoeff();
  if (sv.size() > 1) s.avg = (sv.sum() - *s.min) / static_cast<double>(sv.size() - 1);
  return s;
}

// Owns the trainable state of one run.
class Trainer {
 public:
  explicit Trainer(const ExperimentConfig& c) : c_(c), k_(c.data.num_classes) {
    Rng init_rng(derive_seed(c.seed, {0}));
    switch (c.model.kind) {
      case ModelKind::Mlp: {
        auto ds = make_blob_dataset(k_, c.data.dim, c.data.per_class, c.data.margin, c.data.seed);
        x_ = std::move(ds.X);
        labels_ = std::move(ds.labels);
        mlp_ = make_mlp(c.data.dim, c.model.hidden_sizes, k_, c.model.init_std, init_rng);
        w_ = mlp_.W;
        for (auto& layer : mlp_.hidden) {
          weights_.push_back(layer.weight);
          biases_.push_back(layer.bias);
        }
        break;
      }
      case ModelKind::Ufm: {
        for (int k = 0; k < k_; ++k) labels_.insert(labels_.end(), static_cast<std::size_t>(c.data.per_class), k);
        w_ = gaussian_matrix(k_, c.data.dim, c.model.init_std, init_rng);
        h_ = gaussian_matrix(c.data.dim, static_cast<Eigen::Index>(labels_.size()), c.model.init_std, init_rng);
        break;
      }
      case ModelKind::UfmFixedFeatures: {
        for (int k = 0; k < k_; ++k) labels_.push_back(k);
        w_ = gaussian_matrix(k_, k_, c.model.init_std, init_rng);
        h_ = simplex_etf(k_);
        break;
      }
    }
    if (c.model.zero_init()) w_.setZero();
    y_ = one_hot(labels_, k_);

    params_.push_back(&w_);
    if (c.model.kind == ModelKind::Ufm) params_.push_back(&h_);
    for (auto& wl : weights_) params_.push_back(&wl);
    for (auto& bl : biases_) params_.push_back(&bl);
    states_.resize(params_.size());
  }

  const DenseMatrix& w() const { return w_; }
  const std::vector<int>& labels() const { return labels_; }
  int num_samples() const { return static_cast<int>(labels_.size()); }

  /// One update on the columns in `batch`; returns the batch loss.
  double step(const std::vector<Eigen::Index>& batch, double lr) {
    std::vector<DenseMatrix> grads;
    double loss = 0.0;
    if (c_.model.kind == ModelKind::Mlp) {
      sync_mlp();
      const bool full = static_cast<int>(batch.size()) == num_samples();
      DenseMatrix xb = full ? x_ : x_(Eigen::all, batch);
      DenseMatrix yb = full ? y_ : y_(Eigen::all, batch);
      auto g = mlp_forward_backward(mlp_, xb, yb);
      loss = g.loss;
      grads.push_back(std::move(g.grad_w));
      for (auto& layer : g.hidden) grads.push_back(std::move(layer.weight));
      for (auto& layer : g.hidden) grads.push_back(DenseMatrix(layer.bias));
    } else {
      auto ce = ce_loss_and_grad(w_, h_, y_);
      loss = ce.loss;
      grads.push_back(std::move(ce.grad_w));
      if (c_.model.kind == ModelKind::Ufm) grads.push_back(std::move(ce.grad_x));
    }
    if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      optimizer_step(c_.optimizer, lr, *params_[i], grads[i], states_[i]);
    }
    for (const auto* p : params_) {
      if (!p->allFinite()) throw NumericError("non-finite parameters after update");
    }
    return loss;
  }

  DenseMatrix features() {
    if (c_.model.kind != ModelKind::Mlp) return h_;
    sync_mlp();
    return mlp_.features(x_);
  }

  MetricRecord evaluate(int epoch, double lr) {
    MetricRecord r;
    r.epoch = epoch;
    r.lr = lr;
    const DenseMatrix feats = features();
    const auto ce = ce_loss_and_grad(w_, feats, y_);
    r.train_loss = ce.loss;
    r.train_acc = accuracy(w_ * feats, labels_);
    LabeledFeatures<double> train{feats, labels_, k_};
    r.metrics = compute_metric_suite(w_, train);
    const auto sw = sigma_summary(w_);
    r.sigma_min_w = sw.min;
    r.sigma_avg_w = sw.avg;
    const auto sm = sigma_summary(compute_class_statistics(train).centered_means);
    r.sigma_min_m = sm.min;
    r.sigma_avg_m = sm.avg;
    return r;
  }

 private:
  void sync_mlp() {
    mlp_.W = w_;
    for (std::size_t l = 0; l < mlp_.hidden.size(); ++l) {
      mlp_.hidden[l].weight = weights_[l];
      mlp_.hidden[l].bias = biases_[l].col(0);
    }
  }

  const ExperimentConfig& c_;
  int k_;
  DenseMatrix x_, y_, w_, h_;
  std::vector<int> labels_;
  MLPModel mlp_;
  std::vector<DenseMatrix> weights_, biases_;
  std::vector<DenseMatrix*> params_;
  std::vector<OptimizerState<double>> states_;
};

std::vector<int> displacement_signs(const DenseMatrix& now, const DenseMatrix& before) {
  std::vector<int> s(static_cast<std::size_t>(now.size()));
  for (Eigen::Index i = 0; i < now.size(); ++i) {
    const double d = now(i) - before(i);
    s[static_cast<std::size_t>(i)] = (0.0 < d) - (d < 0.0);
  }
  return s;
}

MetricRecord nan_record(int epoch, double lr) {
  MetricRecord r;
  r.epoch = epoch;
  r.lr = lr;
  r.train_loss = std::numeric_limits<double>::quiet_NaN();
  r.train_acc = 0.0;
  return r;
}

}  // namespace

TrainingResult run_training(const ExperimentConfig& config, const StepObserver& observer) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();

  TrainingResult out;
  out.config = config;
  out.warnings = config.optimizer.stability_warnings();

  Trainer trainer(config);
  out.labels = trainer.labels();
  const int k = config.data.num_classes;
  const int n = trainer.num_samples();
  const int epochs = config.epochs;
  const auto& schedule = config.optimizer.schedule;
  const bool oscillation = schedule.kind == ScheduleKind::OscillationDecay;
  const int batch_size = config.effective_batch_size();

  Rng shuffle_rng(derive_seed(config.seed, {1}));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  OscillationDetector detector;
  double alpha = nc0_alpha(trainer.w());
  out.alpha_peak = alpha;
  out.step_alphas.push_back(alpha);
  out.rowsums.push_back(column_ones_product(trainer.w()));
  double last_lr = lr_at(schedule, 0, epochs, 0);

  try {
    out.records.push_back(trainer.evaluate(0, last_lr));
    for (int e = 0; e < epochs; ++e) {
      if (batch_size < n) std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (int start = 0; start < n; start += batch_size) {
        const int stop = std::min(n, start + batch_size);
        const std::vector<Eigen::Index> batch(order.begin() + start, order.begin() + stop);
        const double lr = lr_at(schedule, e, epochs, out.decay_events);
        const DenseMatrix w_before = oscillation ? trainer.w() : DenseMatrix();
        trainer.step(batch, lr);
        ++out.steps;
        last_lr = lr;
        alpha = nc0_alpha(trainer.w());
        out.step_alphas.push_back(alpha);
        out.alpha_peak = std::max(out.alpha_peak, alpha);
        if (oscillation && detector.observe(displacement_signs(trainer.w(), w_before))) ++out.decay_events;
        if (observer) observer({out.steps, e, lr, &trainer.w(), alpha, out.decay_events});
      }
      out.rowsums.push_back(column_ones_product(trainer.w()));

      const int done = e + 1;
      bool converged = false;
      if (oscillation) {
        const double next_lr = lr_at(schedule, std::min(done, epochs - 1), epochs, out.decay_events);
        converged = oscillation_run_converged(alpha, out.alpha_peak, next_lr, k, config.stop_alpha_ratio);
      }
      if (done % config.metric_period == 0 || done == epochs || converged) {
        out.records.push_back(trainer.evaluate(done, last_lr));
      }
      if (converged) {
        out.status = RunStatus::Converged;
        break;
      }
    }
    if (oscillation && out.status != RunStatus::Converged) out.status = RunStatus::BudgetExhausted;
  } catch (const NumericError& err) {
    out.status = RunStatus::NanAbort;
    out.diagnostic = std::string(err.what()) + " at step " + std::to_string(out.steps + 1);
    out.records.push_back(nan_record(static_cast<int>(out.rowsums.size()), last_lr));
  }

  if (out.status != RunStatus::NanAbort) {
    // Over-regularized: accuracy never leaves chance level once 20% of the epochs are done.
    const int from = static_cast<int>(std::ceil(0.2 * epochs));
    const double chance = 1.0 / k + 0.05;
    bool seen = false;
    bool trained = false;
    for (const auto& r : out.records) {
      if (r.epoch < std::max(from, 1)) continue;
      seen = true;
      trained = trained || r.train_acc > chance;
    }
    if (seen && !trained) {
      out.status = RunStatus::DidNotTrain;
      out.diagnostic = "train accuracy never exceeded " + format_real(chance);
    }
  }

  out.final_w = trainer.w();
  out.final_features = trainer.features();
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

// --- Serialization ----------------------------------------------------------------

void write_records_csv(std::ostream& out, const std::vector<MetricRecord>& records) {
  out << kRecordCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.epoch << ',' << format_real(r.lr) << ',' << format_real(r.train_loss) << ',' << format_real(r.train_acc);
    for (const auto& [name, field] : suite_fields()) out << ',' << cell(r.metrics.*field);
    for (const auto& [name, field] : sigma_fields()) out << ',' << cell(r.*field);
    out << '\n';
  }
}

void emit_csv(const std::vector<MetricRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_records_csv(out, records);
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<MetricRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordCsvHeader) throw IoError("csv: unexpected header '" + line + "'");
  const auto header = split_csv_line(line);

  std::vector<MetricRecord> records;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw IoError("csv line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                    " fields, found " + std::to_string(cells.size()));
    }
    auto required = [&](std::size_t i) {
      const auto v = parse_cell(cells[i], lineno, header[i]);
      if (!v) throw IoError("csv line " + std::to_string(lineno) + ": column " + header[i] + " is empty");
      return *v;
    };
    MetricRecord r;
    r.epoch = static_cast<int>(required(0));
    r.lr = required(1);
    r.train_loss = required(2);
    r.train_acc = required(3);
    std::size_t i = 4;
    for (const auto& [name, field] : suite_fields()) {
      r.metrics.*field = parse_cell(cells[i], lineno, header[i]);
      ++i;
    }
    for (const auto& [name, field] : sigma_fields()) {
      r.*field = parse_cell(cells[i], lineno, header[i]);
      ++i;
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<MetricRecord> load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return parse_csv(in);
  } catch (const IoError& err) {
    throw IoError(path + ": " + err.what());
  }
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

nlohmann::json record_json(const MetricRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["train_loss"] = optional_json(r.train_loss);
  j["train_acc"] = r.train_acc;
  for (const auto& [name, field] : suite_fields()) j[name] = optional_json(r.metrics.*field);
  for (const auto& [name, field] : sigma_fields()) j[name] = optional_json(r.*field);
  return j;
}

}  // namespace

std::string summary_json(const TrainingResult& result) {
  nlohmann::json j;
  nlohmann::json cfg = nlohmann::json::object();
  const auto kv = to_key_values(result.config);
  for (const auto& [key, value] : kv.values()) cfg[key] = value;
  j["config"] = cfg;
  j["status"] = to_string(result.status);
  j["diagnostic"] = result.diagnostic;
  j["warnings"] = result.warnings;
  j["steps"] = result.steps;
  j["decay_events"] = result.decay_events;
  j["alpha_peak"] = result.alpha_peak;
  j["wall_seconds"] = result.wall_seconds;
  j["final"] = result.records.empty() ? nlohmann::json(nullptr) : record_json(result.final_record());
  return j.dump(2);
}

void emit_summary_json(const TrainingResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << summary_json(result) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv_table(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError("csv: missing header");
  t.header = split_csv_line(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw IoError("csv line " + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                    " fields, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

CsvTable load_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return read_csv_table(in);
  } catch (const IoError& err) {
    throw IoError(path + ": " + err.what());
  }
}

// --- Sweeps ----------------------------------------------------------------------

void SweepSpec::validate() const {
  if (lrs.empty() || momenta.empty() || weight_decays.empty() || kinds.empty()) {
    throw DomainError("sweep: every grid must be non-empty");
  }
  if (!(accuracy_threshold >= 0 && accuracy_threshold <= 1)) {
    throw DomainError("sweep: accuracy threshold outside [0, 1]");
  }
  if (threads < 0) throw DomainError("sweep: negative thread count");
}

SweepSpec sweep_from_config(const KeyValueConfig& cfg) {
  SweepSpec s;
  s.base = experiment_from_config(cfg, true);
  s.lrs = cfg.get_doubles("sweep.lr", {s.base.optimizer.learning_rate});
  s.momenta = cfg.get_doubles("sweep.momentum", {s.base.optimizer.momentum});
  s.weight_decays = cfg.get_doubles("sweep.weight_decay", {weight_decay_of(s.base.optimizer)});
  for (const auto& name : cfg.get_strings("sweep.kinds", {to_string(s.base.optimizer.kind)})) {
    s.kinds.push_back(parse_optimizer_kind(name));
  }
  s.accuracy_threshold = cfg.get_double("sweep.accuracy_threshold", s.accuracy_threshold);
  s.output_dir = cfg.get_string("sweep.output_dir", "");
  const auto mode = cfg.get_string("sweep.seed_mode", "derived");
  if (mode != "derived" && mode != "shared") throw DomainError("sweep.seed_mode must be 'derived' or 'shared'");
  s.derive_seeds = mode == "derived";
  s.threads = static_cast<int>(cfg.get_long("sweep.threads", 0));
  s.validate();
  return s;
}

std::uint64_t derive_seed(std::uint64_t base, const std::vector<std::size_t>& coordinates) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (std::size_t c : coordinates) h = mix(h ^ static_cast<std::uint64_t>(c));
  return h;
}

SweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  SweepResult out;
  out.spec = spec;

  std::vector<ExperimentConfig> configs;
  for (std::size_t ik = 0; ik < spec.kinds.size(); ++ik) {
    for (std::size_t il = 0; il < spec.lrs.size(); ++il) {
      for (std::size_t im = 0; im < spec.momenta.size(); ++im) {
        for (std::size_t iw = 0; iw < spec.weight_decays.size(); ++iw) {
          SweepRun run;
          run.index = out.runs.size();
          run.kind = spec.kinds[ik];
          run.lr = spec.lrs[il];
          run.momentum = spec.momenta[im];
          run.weight_decay = spec.weight_decays[iw];
          run.seed = spec.derive_seeds ? derive_seed(spec.base.seed, {ik, il, im, iw}) : spec.base.seed;
          ExperimentConfig c = spec.base;
          c.optimizer.kind = run.kind;
          c.optimizer.learning_rate = run.lr;
          c.optimizer.schedule.base_lr = run.lr;
          c.optimizer.momentum = run.momentum;
          apply_weight_decay(c.optimizer, run.weight_decay);
          c.seed = run.seed;
          c.output.clear();
          configs.push_back(std::move(c));
          out.runs.push_back(std::move(run));
        }
      }
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < out.runs.size(); i = next++) {
      try {
        out.runs[i].result = run_training(configs[i]);
      } catch (const std::exception& err) {
        out.runs[i].error = err.what();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t count =
      std::min<std::size_t>(spec.threads > 0 ? static_cast<std::size_t>(spec.threads) : hw, out.runs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  for (auto& run : out.runs) {
    run.qualifies = run.result && run.result->status != RunStatus::NanAbort &&
                    run.result->status != RunStatus::DidNotTrain &&
                    run.result->final_record().train_acc >= spec.accuracy_threshold;
  }
  return out;
}

void write_summary_csv(std::ostream& out, const SweepResult& sweep) {
  out << "run,kind,lr,momentum,weight_decay,seed,status,qualifies," << kRecordCsvHeader << '\n';
  const std::size_t metric_columns = 4 + suite_fields().size() + sigma_fields().size();
  for (const auto& run : sweep.runs) {
    out << run.index << ',' << to_string(run.kind) << ',' << format_real(run.lr) << ','
        << format_real(run.momentum) << ',' << format_real(run.weight_decay) << ',' << run.seed << ','
        << (run.result ? to_string(run.result->status) : std::string("error")) << ',' << (run.qualifies ? 1 : 0);
    if (run.result && !run.result->records.empty()) {
      std::ostringstream row;
      write_records_csv(row, {run.result->final_record()});
      std::string text = row.str();
      text = text.substr(text.find('\n') + 1);
      text.pop_back();
      out << ',' << text << '\n';
    } else {
      out << std::string(metric_columns, ',') << '\n';
    }
  }
}

void emit_sweep_outputs(const SweepResult& sweep, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "runs", ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());

  {
    const std::string path = (fs::path(dir) / "summary.csv").string();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    write_summary_csv(out, sweep);
  }
  char name[32];
  for (const auto& run : sweep.runs) {
    if (!run.result) continue;
    std::snprintf(name, sizeof(name), "run_%03zu.csv", run.index);
    emit_csv(run.result->records, (fs::path(dir) / "runs" / name).string());
  }

  // Heatmap-ready tables: momentum rows, weight-decay columns, qualifying runs only.
  const auto& spec = sweep.spec;
  const std::size_t nm = spec.momenta.size();
  const std::size_t nw = spec.weight_decays.size();
  for (const std::string metric : {"nc0", "nc2", "nc3"}) {
    for (std::size_t ik = 0; ik < spec.kinds.size(); ++ik) {
      for (std::size_t il = 0; il < spec.lrs.size(); ++il) {
        const std::string path = (fs::path(dir) / ("pivot_" + metric + "_" + to_string(spec.kinds[ik]) + "_lr" +
                                                   std::to_string(il) + ".csv"))
                                     .string();
        std::ofstream out(path);
        if (!out) throw IoError("cannot write '" + path + "'");
        out << "momentum";
        for (double wd : spec.weight_decays) out << ',' << format_real(wd);
        out << '\n';
        for (std::size_t im = 0; im < nm; ++im) {
          out << format_real(spec.momenta[im]);
          for (std::size_t iw = 0; iw < nw; ++iw) {
            const auto& run = sweep.runs[((ik * spec.lrs.size() + il) * nm + im) * nw + iw];
            out << ',';
            if (run.qualifies) out << cell(record_value(run.result->final_record(), metric));
          }
          out << '\n';
        }
      }
    }
  }
}

RegressionFit regress_runs(const SweepResult& sweep, const std::string& x_metric, const std::string& y_metric) {
  std::vector<double> x, y;
  for (const auto& run : sweep.runs) {
    if (!run.qualifies) continue;
    const auto xv = record_value(run.result->final_record(), x_metric);
    const auto yv = record_value(run.result->final_record(), y_metric);
    if (!xv || !yv) continue;
    x.push_back(*xv);
    y.push_back(*yv);
  }
  if (x.size() < 3) {
    throw DomainError("regress_runs: " + std::to_string(x.size()) + " qualifying runs, need at least 3");
  }
  return ols_fit(x, y);
}

RegressionFit regress_table(const CsvTable& table, const std::string& x_metric, const std::string& y_metric) {
  auto xc = table.column(x_metric);
  auto yc = table.column(y_metric);
  if ((!xc || !yc) && table.header.size() == 2) {
    xc = 0;
    yc = 1;
  }
  if (!xc) throw DomainError("regress: no column '" + x_metric + "'");
  if (!yc) throw DomainError("regress: no column '" + y_metric + "'");
  const auto qc = table.column("qualifies");

  std::vector<double> x, y;
  int line = 1;
  for (const auto& row : table.rows) {
    ++line;
    if (qc && row[*qc] != "1" && row[*qc] != "true") continue;
    const auto xv = parse_cell(row[*xc], line, table.header[*xc]);
    const auto yv = parse_cell(row[*yc], line, table.header[*yc]);
    if (!xv || !yv) continue;
    x.push_back(*xv);
    y.push_back(*yv);
  }
  if (x.size() < 3) throw DomainError("regress: " + std::to_string(x.size()) + " usable rows, need at least 3");
  return ols_fit(x, y);
}

// --- Theorem checks ----------------------------------------------------------------

ExperimentConfig theorem_config(int theorem, const TheoremCheckParams& p) {
  ExperimentConfig c;
  c.batch_size = 0;
  c.metric_period = 1;
  c.seed = p.seed.value_or(0);
  auto& o = c.optimizer;
  switch (theorem) {
    case 1:
    case 2:
      c.model.kind = ModelKind::Mlp;
      c.model.hidden_sizes = {16, 16};
      c.data = DataSpec{};
      c.data.num_classes = p.num_classes.value_or(4);
      c.epochs = p.epochs.value_or(300);
      o.kind = theorem == 1 ? OptimizerKind::SgdDecoupled : OptimizerKind::SgdCoupled;
      o.learning_rate = p.lr.value_or(0.05);
      o.momentum = p.momentum.value_or(0.9);
      apply_weight_decay(o, p.wd.value_or(0.1));
      break;
    case 3:
    case 4:
      c.model.kind = ModelKind::UfmFixedFeatures;
      c.model.init = "zero";
      c.data.num_classes = p.num_classes.value_or(10);
      c.data.per_class = 1;
      o.kind = theorem == 3 ? OptimizerKind::SignGdDecoupled : OptimizerKind::SignGdCoupled;
      o.learning_rate = p.lr.value_or(0.1);
      o.momentum = 0.0;
      apply_weight_decay(o, p.wd.value_or(0.5));
      c.epochs = p.epochs.value_or(theorem == 3 ? 2000 : 100000);
      if (theorem == 4) {
        o.schedule.kind = ScheduleKind::OscillationDecay;
        o.schedule.shrink_factor = p.shrink.value_or(0.5);
        c.stop_alpha_ratio = p.stop_ratio.value_or(1e-6);
      }
      break;
    default:
      throw DomainError("check-theorem: theorem must be 1, 2, 3 or 4");
  }
  o.schedule.base_lr = o.learning_rate;
  c.validate();
  return c;
}

namespace {

TheoremCheckRow make_row(long t, double sim, double pred) {
  TheoremCheckRow r{t, sim, pred, std::abs(sim - pred), 0.0};
  r.rel_err = pred != 0.0 ? r.abs_err / std::abs(pred) : (r.abs_err == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return r;
}

}  // namespace

TheoremCheckResult check_theorem(int theorem, const TheoremCheckParams& params) {
  const ExperimentConfig config = theorem_config(theorem, params);
  const auto& o = config.optimizer;
  const double wd = weight_decay_of(o);
  const int k = config.data.num_classes;

  TheoremCheckResult out;
  out.theorem = theorem;
  out.tolerance = 1e-9;

  double family_deviation = 0.0;
  StepObserver observer;
  if (theorem == 4) {
    observer = [&](const StepEvent& ev) {
      const DenseMatrix& w = *ev.w;
      const double a = w(0, 0);
      const double b = -w(0, 1);
      const DenseMatrix fit = (a + b) * DenseMatrix::Identity(k, k) - b * DenseMatrix::Ones(k, k);
      family_deviation = std::max(family_deviation, (w - fit).cwiseAbs().maxCoeff());
    };
  }
  out.run = run_training(config, observer);
  const auto& run = out.run;
  if (run.status == RunStatus::NanAbort) {
    out.detail = "simulation aborted: " + run.diagnostic;
    return out;
  }

  bool ok = true;
  std::ostringstream detail;
  switch (theorem) {
    case 1: {
      const double alpha0 = run.step_alphas.front();
      for (std::size_t t = 0; t < run.step_alphas.size(); ++t) {
        out.rows.push_back(make_row(static_cast<long>(t), run.step_alphas[t],
                                    alpha_sgd_decoupled(static_cast<long>(t), alpha0, o.learning_rate, wd)));
        ok = ok && out.rows.back().abs_err <= out.tolerance * std::abs(out.rows.back().alpha_pred);
      }
      detail << "nc0_alpha vs (1 - lr wd)^(2t) alpha_0, relative tolerance " << format_real(out.tolerance);
      break;
    }
    case 2: {
      const auto predicted = rowsum_recursion_coupled(run.rowsums.front(), o.learning_rate, o.momentum, wd, run.steps);
      const auto alphas = alpha_from_rowsums(predicted);
      const double scale = std::max(1.0, run.rowsums.front().cwiseAbs().maxCoeff());
      double worst = 0.0;
      for (std::size_t t = 0; t < run.rowsums.size(); ++t) {
        out.rows.push_back(make_row(static_cast<long>(t), run.step_alphas[t], alphas[t]));
        worst = std::max(worst, (run.rowsums[t] - predicted[t]).cwiseAbs().maxCoeff());
      }
      ok = worst <= out.tolerance * scale;
      detail << "W^T 1 vs row-sum recursion, max coordinate error " << format_real(worst) << " (tolerance "
             << format_real(out.tolerance * scale) << ")";
      break;
    }
    case 3: {
      for (std::size_t t = 0; t < run.step_alphas.size(); ++t) {
        out.rows.push_back(make_row(static_cast<long>(t), run.step_alphas[t],
                                    alpha_signgd_decoupled(static_cast<long>(t), k, o.learning_rate, wd)));
        ok = ok && out.rows.back().abs_err <= out.tolerance * std::abs(out.rows.back().alpha_pred);
      }
      detail << "nc0_alpha vs closed form, relative tolerance " << format_real(out.tolerance);
      break;
    }
    case 4: {
      OracleTrajectory traj;
      bool oracle_done = true;
      try {
        traj = coupled_signgd_run_with_decay(k, k, o.learning_rate, wd, o.schedule.shrink_factor,
                                             config.stop_alpha_ratio, config.epochs);
      } catch (const OracleTimeout& err) {
        traj = err.trajectory;
        oracle_done = false;
      }
      const double peak = traj.peak();
      const std::size_t common = std::min(traj.points.size(), run.step_alphas.size());
      for (std::size_t t = 0; t < common; ++t) {
        out.rows.push_back(make_row(static_cast<long>(t), run.step_alphas[t], traj.points[t].alpha));
        ok = ok && out.rows.back().abs_err <= out.tolerance * peak;
      }
      const bool same_length = traj.points.size() == run.step_alphas.size();
      const bool converged = run.status == RunStatus::Converged && oracle_done;
      ok = ok && same_length && converged && family_deviation <= 1e-12;
      detail << "nc0_alpha vs scalar recursion, tolerance " << format_real(out.tolerance) << " x peak; steps sim "
             << run.steps << " oracle " << traj.points.size() - 1 << "; status " << to_string(run.status)
             << "; family deviation " << format_real(family_deviation);
      break;
    }
    default:
      break;
  }
  out.passed = ok;
  out.detail = detail.str();
  return out;
}

}  // namespace nclab
