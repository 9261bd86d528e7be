// nc-lab: training runs, sweeps, theorem oracles and metric evaluation.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nclab/errors.hpp"
#include "nclab/harness.hpp"
#include "nclab/io.hpp"
#include "nclab/metrics.hpp"
#include "nclab/oracles.hpp"

namespace {

using namespace nclab;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitTolerance = 2;

nlohmann::json nullable(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

// Writes to `path`, or stdout when empty.
template <typename F>
void with_output(const std::string& path, F&& write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write(out);
}

int cmd_train(const std::string& config_path, const std::string& output, const std::string& summary) {
  const auto config = experiment_from_config(KeyValueConfig::load(config_path));
  const auto result = run_training(config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  const std::string csv = output.empty() ? config.output : output;
  with_output(csv, [&](std::ostream& out) { write_records_csv(out, result.records); });
  if (!summary.empty()) emit_summary_json(result, summary);
  std::cerr << "status: " << to_string(result.status) << " after " << result.steps << " steps";
  if (!result.diagnostic.empty()) std::cerr << " (" << result.diagnostic << ")";
  std::cerr << '\n';
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& output_dir) {
  auto spec = sweep_from_config(KeyValueConfig::load(config_path));
  if (!output_dir.empty()) spec.output_dir = output_dir;
  if (spec.output_dir.empty()) throw DomainError("sweep: set sweep.output_dir or --output-dir");
  const auto sweep = run_sweep(spec);
  emit_sweep_outputs(sweep, spec.output_dir);
  std::size_t qualifying = 0;
  std::size_t failed = 0;
  for (const auto& run : sweep.runs) {
    qualifying += run.qualifies ? 1 : 0;
    if (!run.result) {
      ++failed;
      std::cerr << "run " << run.index << " failed: " << run.error << '\n';
    }
  }
  std::cout << sweep.runs.size() << " runs, " << qualifying << " qualifying, " << failed << " failed; output in "
            << spec.output_dir << '\n';
  return kExitOk;
}

struct OracleOptions {
  std::string theorem;
  double alpha0 = 1.0;
  double lr = 0.1;
  double wd = 0.5;
  double momentum = 0.9;
  int k = 10;
  int n = 0;
  long steps = 100;
  std::string m0 = "1";
  double shrink = 0.5;
  double tol = 1e-6;
  double beta = 0.9;
  double t_max = 50.0;
  double dt = 1.0;
  std::string output;
};

int cmd_oracle(const OracleOptions& o) {
  std::ostringstream csv;
  csv << "t,alpha_predicted\n";
  auto row = [&](const std::string& t, double alpha) { csv << t << ',' << format_real(alpha) << '\n'; };
  if (o.theorem == "1") {
    for (long t = 0; t <= o.steps; ++t) row(std::to_string(t), alpha_sgd_decoupled(t, o.alpha0, o.lr, o.wd));
  } else if (o.theorem == "2") {
    const auto v = parse_list(o.m0);
    const DenseVector m0 = Eigen::Map<const DenseVector>(v.data(), static_cast<Eigen::Index>(v.size()));
    const auto alphas = alpha_from_rowsums(rowsum_recursion_coupled(m0, o.lr, o.momentum, o.wd, o.steps));
    for (std::size_t t = 0; t < alphas.size(); ++t) row(std::to_string(t), alphas[t]);
  } else if (o.theorem == "3") {
    for (long t = 0; t <= o.steps; ++t) row(std::to_string(t), alpha_signgd_decoupled(t, o.k, o.lr, o.wd));
  } else if (o.theorem == "4") {
    const auto traj = coupled_signgd_run_with_decay(o.k, o.n > 0 ? o.n : o.k, o.lr, o.wd, o.shrink, o.tol, o.steps);
    for (const auto& p : traj.points) row(std::to_string(p.t), p.alpha);
  } else if (o.theorem == "ode") {
    if (!(o.dt > 0)) throw DomainError("oracle: --dt must be positive");
    const auto count = static_cast<long>(std::floor(o.t_max / o.dt + 1e-9));
    for (long i = 0; i <= count; ++i) {
      const double t = static_cast<double>(i) * o.dt;
      row(format_real(t), ode_alpha_closed_form(t, o.alpha0, o.wd, o.beta));
    }
  } else {
    throw DomainError("oracle: --theorem must be 1, 2, 3, 4 or ode");
  }
  with_output(o.output, [&](std::ostream& out) { out << csv.str(); });
  return kExitOk;
}

int cmd_check(int theorem, const TheoremCheckParams& params, const std::string& output) {
  const auto result = check_theorem(theorem, params);
  with_output(output, [&](std::ostream& out) {
    out << "t,alpha_sim,alpha_pred,abs_err,rel_err\n";
    for (const auto& r : result.rows) {
      out << r.t << ',' << format_real(r.alpha_sim) << ',' << format_real(r.alpha_pred) << ','
          << format_real(r.abs_err) << ',' << format_real(r.rel_err) << '\n';
    }
  });
  std::cerr << (result.passed ? "PASS" : "FAIL") << " theorem " << theorem << ": " << result.detail << '\n';
  return result.passed ? kExitOk : kExitTolerance;
}

int cmd_metrics(const std::string& weights, const std::string& features, const std::string& labels,
                const std::string& test_features, const std::string& test_labels) {
  const DenseMatrix w = load_matrix(weights);
  LabeledFeatures<double> train{load_matrix(features), load_labels(labels), static_cast<int>(w.rows())};
  train.validate();
  std::optional<LabeledFeatures<double>> test;
  if (!test_features.empty() || !test_labels.empty()) {
    if (test_features.empty() || test_labels.empty()) {
      throw DomainError("metrics: --test-features and --test-labels go together");
    }
    test = LabeledFeatures<double>{load_matrix(test_features), load_labels(test_labels), static_cast<int>(w.rows())};
    test->validate();
  }
  if (w.cols() != train.features.rows()) {
    throw ShapeError("metrics: W is " + shape_string(w.rows(), w.cols()) + " but features have " +
                     std::to_string(train.features.rows()) + " rows");
  }
  const auto s = compute_metric_suite(w, train, test ? &*test : nullptr);
  nlohmann::ordered_json j;
  j["nc0"] = nullable(s.nc0);
  j["nc0_alpha"] = nullable(s.nc0_alpha);
  j["nc0_normalized"] = nullable(s.nc0_normalized);
  j["nc1"] = nullable(s.nc1);
  j["nc2"] = nullable(s.nc2);
  j["nc2n"] = nullable(s.nc2n);
  j["nc2a"] = nullable(s.nc2a);
  j["nc2w"] = nullable(s.nc2w);
  j["nc2wn"] = nullable(s.nc2wn);
  j["nc2wa"] = nullable(s.nc2wa);
  j["nc2m"] = nullable(s.nc2m);
  j["nc3"] = nullable(s.nc3);
  j["nc4"] = nullable(s.nc4);
  std::cout << j.dump() << '\n';
  return kExitOk;
}

int cmd_regress(const std::string& csv, const std::string& x, const std::string& y) {
  const auto fit = regress_table(load_csv_table(csv), x, y);
  nlohmann::ordered_json j;
  j["n"] = fit.n;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["se"] = fit.se;
  j["t_value"] = nullable(fit.t_value);
  j["p_value"] = fit.p_value;
  j["ci95_low"] = fit.ci95_low;
  j["ci95_high"] = fit.ci95_high;
  j["r_squared"] = fit.r_squared;
  j["adj_r_squared"] = fit.adj_r_squared;
  j["f_statistic"] = nullable(fit.f_statistic);
  std::cout << j.dump() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural-collapse lab: NC metrics, optimizer dynamics and theorem oracles"};
  app.require_subcommand(1);

  std::string config_path, output, summary, output_dir;
  auto* train = app.add_subcommand("train", "Run one experiment and write the per-epoch CSV");
  train->add_option("--config", config_path, "key=value experiment file")->required()->check(CLI::ExistingFile);
  train->add_option("--output", output, "CSV path (default: train.output, else stdout)");
  train->add_option("--summary", summary, "JSON summary path");

  auto* sweep = app.add_subcommand("sweep", "Run a grid of experiments");
  sweep->add_option("--config", config_path, "key=value sweep file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--output-dir", output_dir, "overrides sweep.output_dir");

  OracleOptions oracle_opts;
  auto* oracle = app.add_subcommand("oracle", "Print the predicted alpha trajectory");
  oracle->add_option("--theorem", oracle_opts.theorem, "1, 2, 3, 4 or ode")
      ->required()
      ->check(CLI::IsMember({"1", "2", "3", "4", "ode"}));
  oracle->add_option("--alpha0", oracle_opts.alpha0, "initial alpha (1, ode)");
  oracle->add_option("--lr", oracle_opts.lr, "learning rate");
  oracle->add_option("--wd", oracle_opts.wd, "weight decay");
  oracle->add_option("--momentum", oracle_opts.momentum, "momentum (2)");
  oracle->add_option("--beta", oracle_opts.beta, "momentum of the continuous model (ode)");
  oracle->add_option("--k", oracle_opts.k, "number of classes (3, 4)");
  oracle->add_option("--n", oracle_opts.n, "number of samples (4, default K)");
  oracle->add_option("--steps", oracle_opts.steps, "steps (1-3), step budget (4)");
  oracle->add_option("--m0", oracle_opts.m0, "comma-separated initial row sums (2)");
  oracle->add_option("--shrink", oracle_opts.shrink, "learning-rate shrink on oscillation (4)");
  oracle->add_option("--tol", oracle_opts.tol, "stop ratio alpha / alpha_peak (4)");
  oracle->add_option("--t-max", oracle_opts.t_max, "time horizon (ode)");
  oracle->add_option("--dt", oracle_opts.dt, "sampling interval (ode)");
  oracle->add_option("--output", oracle_opts.output, "CSV path (default stdout)");

  int theorem = 0;
  TheoremCheckParams check_params;
  std::string check_output;
  auto* check = app.add_subcommand("check-theorem", "Simulate and compare against the oracle");
  check->add_option("theorem", theorem, "1, 2, 3 or 4")->required()->check(CLI::Range(1, 4));
  check->add_option("--lr", check_params.lr, "learning rate (initial for 4)");
  check->add_option("--wd", check_params.wd, "weight decay");
  check->add_option("--momentum", check_params.momentum, "momentum (1, 2)");
  check->add_option("--epochs", check_params.epochs, "epochs / step budget");
  check->add_option("--k", check_params.num_classes, "number of classes");
  check->add_option("--seed", check_params.seed, "training seed");
  check->add_option("--shrink", check_params.shrink, "learning-rate shrink (4)");
  check->add_option("--stop-ratio", check_params.stop_ratio, "stop when alpha <= ratio * peak (4)");
  check->add_option("--output", check_output, "CSV path (default stdout)");

  std::string weights, features, labels, test_features, test_labels;
  auto* metrics = app.add_subcommand("metrics", "Evaluate every NC metric as JSON");
  metrics->add_option("--weights", weights, "K x P matrix file")->required()->check(CLI::ExistingFile);
  metrics->add_option("--features", features, "P x N matrix file")->required()->check(CLI::ExistingFile);
  metrics->add_option("--labels", labels, "one label per line")->required()->check(CLI::ExistingFile);
  metrics->add_option("--test-features", test_features, "held-out features for NC4");
  metrics->add_option("--test-labels", test_labels, "held-out labels for NC4");

  std::string csv, x_col = "nc0", y_col = "nc3";
  auto* regress = app.add_subcommand("regress", "OLS fit of one column on another");
  regress->add_option("--csv", csv, "CSV with a header row")->required()->check(CLI::ExistingFile);
  regress->add_option("--x", x_col, "regressor column")->capture_default_str();
  regress->add_option("--y", y_col, "response column")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*train) return cmd_train(config_path, output, summary);
    if (*sweep) return cmd_sweep(config_path, output_dir);
    if (*oracle) return cmd_oracle(oracle_opts);
    if (*check) return cmd_check(theorem, check_params, check_output);
    if (*metrics) return cmd_metrics(weights, features, labels, test_features, test_labels);
    if (*regress) return cmd_regress(csv, x_col, y_col);
  } catch (const std::exception& err) {
    std::cerr << "nc-lab: " << err.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
