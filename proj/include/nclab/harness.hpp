#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nclab/config.hpp"
#include "nclab/metrics.hpp"
#include "nclab/optimizers.hpp"
#include "nclab/stats.hpp"
#include "nclab/tensor.hpp"

namespace nclab {

enum class ModelKind { Ufm, UfmFixedFeatures, Mlp };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct DataSpec {
  int num_classes = 4;
  int dim = 8;
  int per_class = 25;
  std::uint64_t seed = 11;
  double margin = 1.0;
};

struct ModelSpec {
  ModelKind kind = ModelKind::Mlp;
  std::vector<int> hidden_sizes{16, 16};
  std::string init;  // "gaussian" or "zero"; empty picks zero for ufm_fixed_features, gaussian otherwise
  double init_std = 0.1;

  bool zero_init() const;
};

struct ExperimentConfig {
  ModelSpec model;
  DataSpec data;
  OptimizerConfig optimizer;
  int epochs = 500;
  int batch_size = 0;  // 0 means full batch
  std::uint64_t seed = 0;
  int metric_period = 1;
  std::string output;
  double stop_alpha_ratio = 1e-6;  // oscillation_decay stop rule

  int num_samples() const;
  int effective_batch_size() const;
  void validate() const;
};

/// Reads `optimizer.*`, `model.*`, `data.*` and `train.*` keys; unknown keys are an error
/// unless `allow_sweep_keys` admits the `sweep.*` family.
ExperimentConfig experiment_from_config(const KeyValueConfig& cfg, bool allow_sweep_keys = false);
KeyValueConfig to_key_values(const ExperimentConfig& config);

/// Sets the decay strength on whichever channel the rule uses; adam_interpolated splits it evenly.
void apply_weight_decay(OptimizerConfig& config, double wd);
/// Total decay strength carried by the config.
double weight_decay_of(const OptimizerConfig& config);

struct MetricRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  MetricSuite metrics;
  std::optional<double> sigma_min_w, sigma_avg_w, sigma_min_m, sigma_avg_m;
};

bool operator==(const MetricRecord& a, const MetricRecord& b);

/// Column lookup by CSV header name (`nc0`, `train_acc`, `sigma_min_w`, ...).
std::optional<double> record_value(const MetricRecord& r, const std::string& column);

enum class RunStatus { Completed, Converged, DidNotTrain, NanAbort, BudgetExhausted };
std::string to_string(RunStatus status);

struct StepEvent {
  long step = 0;  // number of updates applied so far
  int epoch = 0;
  double lr = 0.0;  // step size of the update just applied
  const DenseMatrix* w = nullptr;
  double alpha = 0.0;
  int decay_events = 0;
};
using StepObserver = std::function<void(const StepEvent&)>;

struct TrainingResult {
  ExperimentConfig config;
  std::vector<MetricRecord> records;
  std::vector<DenseVector> rowsums;  // W^T 1 after each epoch, index 0 is the initial W
  std::vector<double> step_alphas;   // nc0_alpha after each update, index 0 is the initial W
  DenseMatrix final_w;
  DenseMatrix final_features;
  std::vector<int> labels;
  RunStatus status = RunStatus::Completed;
  std::string diagnostic;
  std::vector<std::string> warnings;
  long steps = 0;
  int decay_events = 0;
  double alpha_peak = 0.0;
  double wall_seconds = 0.0;

  const MetricRecord& final_record() const;
};

TrainingResult run_training(const ExperimentConfig& config, const StepObserver& observer = {});

// --- Serialization ----------------------------------------------------------------

extern const char* const kRecordCsvHeader;

void write_records_csv(std::ostream& out, const std::vector<MetricRecord>& records);
void emit_csv(const std::vector<MetricRecord>& records, const std::string& path);
std::vector<MetricRecord> parse_csv(std::istream& in);
std::vector<MetricRecord> load_csv(const std::string& path);

std::string summary_json(const TrainingResult& result);
void emit_summary_json(const TrainingResult& result, const std::string& path);

/// Generic header + string cells; used for summary tables and regression input.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const;
};

CsvTable read_csv_table(std::istream& in);
CsvTable load_csv_table(const std::string& path);

// --- Sweeps ----------------------------------------------------------------------

struct SweepSpec {
  ExperimentConfig base;
  std::vector<double> lrs;
  std::vector<double> momenta;
  std::vector<double> weight_decays;
  std::vector<OptimizerKind> kinds;
  double accuracy_threshold = 0.99;
  std::string output_dir;
  bool derive_seeds = true;  // false: every run uses base.seed
  int threads = 0;           // 0: hardware concurrency

  std::size_t size() const { return lrs.size() * momenta.size() * weight_decays.size() * kinds.size(); }
  void validate() const;
};

SweepSpec sweep_from_config(const KeyValueConfig& cfg);

/// splitmix64 over the base seed and grid coordinates.
std::uint64_t derive_seed(std::uint64_t base, const std::vector<std::size_t>& coordinates);

struct SweepRun {
  std::size_t index = 0;
  OptimizerKind kind = OptimizerKind::SgdCoupled;
  double lr = 0.0;
  double momentum = 0.0;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  std::optional<TrainingResult> result;
  std::string error;
  bool qualifies = false;
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepRun> runs;  // grid order: kind, lr, momentum, weight decay
};

SweepResult run_sweep(const SweepSpec& spec);

void write_summary_csv(std::ostream& out, const SweepResult& sweep);
/// summary.csv, runs/run_NNN.csv and pivot_<metric>_<kind>_lr<i>.csv under `dir`.
void emit_sweep_outputs(const SweepResult& sweep, const std::string& dir);

/// OLS of final y_metric on final x_metric over qualifying runs.
RegressionFit regress_runs(const SweepResult& sweep, const std::string& x_metric = "nc0",
                           const std::string& y_metric = "nc3");
/// Same over a table: rows with qualifies = 0 are dropped when that column exists; rows
/// with an empty x or y cell are skipped. A two-column table without the named columns
/// is read positionally.
RegressionFit regress_table(const CsvTable& table, const std::string& x_metric = "nc0",
                            const std::string& y_metric = "nc3");

// --- Theorem checks ----------------------------------------------------------------

struct TheoremCheckParams {
  std::optional<double> lr, wd, momentum, shrink, stop_ratio;
  std::optional<int> epochs, num_classes;
  std::optional<std::uint64_t> seed;
};

struct TheoremCheckRow {
  long t = 0;
  double alpha_sim = 0.0;
  double alpha_pred = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
};

struct TheoremCheckResult {
  int theorem = 0;
  std::vector<TheoremCheckRow> rows;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
  TrainingResult run;
};

/// Simulation configuration for theorem 1..4 with the check defaults.
ExperimentConfig theorem_config(int theorem, const TheoremCheckParams& params = {});
TheoremCheckResult check_theorem(int theorem, const TheoremCheckParams& params = {});

}  // namespace nclab
