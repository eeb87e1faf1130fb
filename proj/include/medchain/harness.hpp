#ifndef MEDCHAIN_HARNESS_HPP
#define MEDCHAIN_HARNESS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "medchain/conditional.hpp"
#include "medchain/dgp.hpp"
#include "medchain/dpm.hpp"
#include "medchain/panel.hpp"

namespace medchain {

/// Known model labels: reg1, reg2, gam, bnp, bnpbdm and oracle (the truth
/// oracle re-run on an independent stream, a self-consistency estimator).
const std::vector<std::string>& benchmark_models();

struct BenchConfig {
  int case_id = 1;
  std::vector<std::string> models{"reg1", "reg2", "gam", "bnp", "bnpbdm"};
  int reps = 50;
  std::size_t n = 500;
  McmcConfig mcmc = McmcConfig::desk();
  std::string profile = "desk";
  std::uint64_t seed = 1;
  std::vector<int> times;          // empty: 1..T
  std::size_t n_mc = 1000;         // g-formula forward paths per posterior draw
  std::size_t param_draws = 200;   // normal-theory draws for the regression comparators
  std::size_t truth_n_mc = 100000;
  std::size_t oracle_n_mc = 20000;
  int threads = 1;
  DgpConfig dgp;                   // n, schedule and seed are overwritten per replication

  void validate() const;
};

BenchConfig bench_config_from_json(const nlohmann::json& j, BenchConfig base = {});
nlohmann::json to_json(const BenchConfig& cfg);

struct BenchRow {
  std::string model;
  std::string effect;  // NDE, NIE, TE
  int t = 0;
  double truth = 0.0, truth_se = 0.0;
  double bias = 0.0, mse = 0.0;
  double bias_se = 0.0, mse_se = 0.0;  // Monte Carlo SEs across replications
  std::size_t reps = 0;                // successful replications
};

struct BenchFailure {
  int rep = 0;
  std::string model;
  std::string message;
};

struct BenchResult {
  int case_id = 1;
  std::string case_label;
  int reps = 0;
  BenchConfig config;
  std::vector<BenchRow> rows;
  std::vector<BenchFailure> failures;
  /// Point estimates (posterior medians) per replication, keyed "model/effect/t".
  std::map<std::string, std::vector<double>> estimates;

  const BenchRow& row(const std::string& model, const std::string& effect, int t) const;
};

struct BenchTiming {
  double total_seconds = 0.0;
  std::map<std::string, double> model_seconds;  // summed over replications
};

/// Replication study. Results do not depend on `cfg.threads`; timing is
/// reported separately. Throws NumericalError when more than 5% of the
/// replications of any model fail.
BenchResult run_benchmark(const BenchConfig& cfg, BenchTiming* timing = nullptr);

/// Bias / MSE row from replication estimates against a fixed truth.
BenchRow accumulate(const std::string& model, const std::string& effect, int t, double truth, double truth_se,
                    const std::vector<double>& estimates);

struct Histogram {
  double lo = 0.0, hi = 0.0;
  std::vector<double> observed;    // counts
  std::vector<double> replicated;  // counts averaged over replicates
};

struct PpcTime {
  int t = 0;
  std::size_t units = 0;
  double observed_mean = 0.0;
  double diff_mean = 0.0;      // mean over replicates of mean(yhat) - mean(y)
  double diff_sd = 0.0;        // across replicates
  double diff_mc_se = 0.0;
  double abs_diff = 0.0;       // |diff_mean|
  double binned_abs_diff = 0.0;  // mediator-quintile bins, averaged over bins and replicates
  double binned_mc_se = 0.0;
  Histogram histogram;
};

struct PpcResult {
  std::string model;
  std::vector<int> history;
  std::size_t replicates = 0;
  std::vector<PpcTime> times;
};

/// Posterior-predictive replicates of Y(t) for the units following the
/// regime's history through t, drawn from the fitted outcome cells at the
/// observed predictors. `history` must match the regime's.
PpcResult ppc(const FittedRegime& regime, const Panel& panel, const std::vector<int>& history, std::uint64_t seed,
              std::size_t max_replicates = 0);

nlohmann::json to_json(const PpcResult& r);

/// CSV and JSON tables in long format (model, effect, t, statistic, value).
/// `format` is csv, json or both; returns the written paths.
std::vector<std::string> emit_report(const BenchResult& result, const std::string& stem, const std::string& format);
std::string bench_csv(const BenchResult& result);

}  // namespace medchain

#endif
