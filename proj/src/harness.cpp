#include "medchain/harness.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "medchain/baselines.hpp"
#include "medchain/dynamics.hpp"
#include "medchain/estimands.hpp"
#include "medchain/json_util.hpp"
#include "medchain/serialize.hpp"
#include "medchain/stats.hpp"

namespace medchain {

const std::vector<std::string>& benchmark_models() {
  static const std::vector<std::string> m{"reg1", "reg2", "gam", "bnp", "bnpbdm", "oracle"};
  return m;
}

void BenchConfig::validate() const {
  if (case_id < 1 || case_id > 3) throw ValidationError("benchmark: case must be 1, 2 or 3");
  if (reps < 2) throw ValidationError("benchmark: reps must be >= 2");
  if (n < 10) throw ValidationError("benchmark: n must be >= 10");
  if (models.empty()) throw ValidationError("benchmark: no models");
  for (const auto& m : models)
    if (std::find(benchmark_models().begin(), benchmark_models().end(), m) == benchmark_models().end())
      throw ValidationError("benchmark: unknown model '" + m + "'");
  mcmc.validate();
  if (n_mc < 1000) throw ValidationError("benchmark: n_mc must be >= 1000");
  if (truth_n_mc < 1000) throw ValidationError("benchmark: truth n_mc must be >= 1000");
  if (param_draws < 1) throw ValidationError("benchmark: param_draws must be >= 1");
  for (int t : times)
    if (t < 1 || t > dgp.T) throw ValidationError("benchmark: time " + std::to_string(t) + " outside 1..T");
  if (threads < 1) throw ValidationError("benchmark: threads must be >= 1");
  dgp.validate();
}

BenchConfig bench_config_from_json(const nlohmann::json& j, BenchConfig c) {
  try {
    if (j.contains("dgp")) c.dgp = dgp_config_from_json(j.at("dgp"), c.dgp);
    if (j.contains("case")) c.case_id = j.at("case").get<int>();
    if (j.contains("models")) c.models = j.at("models").get<std::vector<std::string>>();
    if (j.contains("reps")) c.reps = j.at("reps").get<int>();
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("profile")) {
      c.profile = j.at("profile").get<std::string>();
      c.mcmc = McmcConfig::named(c.profile);
    }
    if (j.contains("mcmc")) {
      const auto& m = j.at("mcmc");
      c.mcmc = {m.at("iterations").get<int>(), m.at("burn_in").get<int>(), m.at("thin").get<int>()};
      if (!j.contains("profile")) c.profile = "custom";
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("times")) c.times = j.at("times").get<std::vector<int>>();
    if (j.contains("n_mc")) c.n_mc = j.at("n_mc").get<std::size_t>();
    if (j.contains("param_draws")) c.param_draws = j.at("param_draws").get<std::size_t>();
    if (j.contains("truth_n_mc")) c.truth_n_mc = j.at("truth_n_mc").get<std::size_t>();
    if (j.contains("oracle_n_mc")) c.oracle_n_mc = j.at("oracle_n_mc").get<std::size_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("benchmark config: ") + e.what());
  }
  return c;
}

// Worker count is deliberately absent: results must not depend on it.
nlohmann::json to_json(const BenchConfig& c) {
  return {{"case", c.case_id},
          {"models", c.models},
          {"reps", c.reps},
          {"n", c.n},
          {"profile", c.profile},
          {"mcmc", {{"iterations", c.mcmc.iterations}, {"burn_in", c.mcmc.burn_in}, {"thin", c.mcmc.thin}}},
          {"seed", c.seed},
          {"times", c.times},
          {"n_mc", c.n_mc},
          {"param_draws", c.param_draws},
          {"truth_n_mc", c.truth_n_mc},
          {"oracle_n_mc", c.oracle_n_mc},
          {"dgp", to_json(c.dgp)}};
}

const BenchRow& BenchResult::row(const std::string& model, const std::string& effect, int t) const {
  for (const auto& r : rows)
    if (r.model == model && r.effect == effect && r.t == t) return r;
  throw ValidationError("benchmark result: no row for " + model + "/" + effect + "/t" + std::to_string(t));
}

BenchRow accumulate(const std::string& model, const std::string& effect, int t, double truth, double truth_se,
                    const std::vector<double>& estimates) {
  BenchRow r;
  r.model = model;
  r.effect = effect;
  r.t = t;
  r.truth = truth;
  r.truth_se = truth_se;
  r.reps = estimates.size();
  if (estimates.empty()) {
    r.bias = r.mse = r.bias_se = r.mse_se = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  std::vector<double> err, sq;
  for (double e : estimates) {
    err.push_back(e - truth);
    sq.push_back((e - truth) * (e - truth));
  }
  const double rn = std::sqrt(static_cast<double>(estimates.size()));
  r.bias = stats::mean(err);
  r.mse = stats::mean(sq);
  r.bias_se = stats::sd(err) / rn;
  r.mse_se = stats::sd(sq) / rn;
  return r;
}

namespace {

const char* kEffects[] = {"NDE", "NIE", "TE"};

std::uint64_t name_code(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string key(const std::string& model, const char* effect, int t) {
  return model + "/" + effect + "/" + std::to_string(t);
}

FittedRegime fit_model(const std::string& model, const Panel& panel, const BenchConfig& cfg, std::uint64_t seed) {
  if (model == "reg1" || model == "reg2" || model == "gam") {
    const auto fit = fit_baselines(panel, parse_baseline(model));
    return to_regime(fit, cfg.param_draws, seed);
  }
  SequentialOptions opts;
  opts.mcmc = cfg.mcmc;
  opts.dynamic = model == "bnpbdm";
  const auto chain = sequential_fit(panel, opts, seed);
  return to_regime(chain, model, derive_seed(seed, {0x7e}));
}

struct RepOutcome {
  // model index -> (t index -> {nde, nie, te}) or failure message
  std::vector<std::optional<std::vector<std::array<double, 3>>>> est;
  std::vector<std::string> error;
  std::vector<double> seconds;
};

}  // namespace

BenchResult run_benchmark(const BenchConfig& cfg_in, BenchTiming* timing) {
  BenchConfig cfg = cfg_in;
  cfg.dgp.schedule = static_cast<Schedule>(cfg.case_id - 1);
  cfg.dgp.n = cfg.n;
  cfg.validate();
  std::vector<int> times = cfg.times;
  if (times.empty())
    for (int t = 1; t <= cfg.dgp.T; ++t) times.push_back(t);

  const auto start = std::chrono::steady_clock::now();

  std::vector<TruthOracle> truth;
  for (int t : times)
    truth.push_back(true_effects(cfg.dgp, Contrast::final_switch(t), cfg.truth_n_mc,
                                 derive_seed(cfg.seed, {0x7a, static_cast<std::uint64_t>(t)}), cfg.threads));

  const std::size_t M = cfg.models.size();
  std::vector<RepOutcome> reps(static_cast<std::size_t>(cfg.reps));
  parallel_for(reps.size(), cfg.threads, [&](std::size_t rep) {
    RepOutcome& out = reps[rep];
    out.est.resize(M);
    out.error.resize(M);
    out.seconds.assign(M, 0.0);
    const std::uint64_t rep_seed = derive_seed(cfg.seed, {0xbe, rep});
    DgpConfig dgp = cfg.dgp;
    dgp.seed = rep_seed;
    std::optional<Panel> panel;
    std::string panel_error;
    try {
      panel = simulate_panel(dgp);
    } catch (const std::exception& e) {
      panel_error = std::string("simulation: ") + e.what();
    }
    for (std::size_t mi = 0; mi < M; ++mi) {
      const auto& model = cfg.models[mi];
      if (!panel) {
        out.error[mi] = panel_error;
        continue;
      }
      const auto t0 = std::chrono::steady_clock::now();
      const std::uint64_t mseed = derive_seed(rep_seed, {name_code(model)});
      try {
        std::vector<std::array<double, 3>> v;
        if (model == "oracle") {
          for (int t : times) {
            const auto o = true_effects(cfg.dgp, Contrast::final_switch(t), cfg.oracle_n_mc,
                                        derive_seed(mseed, {static_cast<std::uint64_t>(t)}), 1);
            v.push_back({o.nde, o.nie, o.te});
          }
        } else {
          const auto regime = fit_model(model, *panel, cfg, mseed);
          for (int t : times) {
            const auto e = effects(regime, *panel, Contrast::final_switch(t), cfg.n_mc,
                                   derive_seed(mseed, {0xef, static_cast<std::uint64_t>(t)}), 1);
            v.push_back({e.nde_summary().median, e.nie_summary().median, e.te_summary().median});
          }
        }
        for (const auto& a : v)
          for (double x : a)
            if (!std::isfinite(x)) throw NumericalError("non-finite effect estimate");
        out.est[mi] = std::move(v);
      } catch (const std::exception& e) {
        out.error[mi] = e.what();
      }
      out.seconds[mi] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  });

  BenchResult res;
  res.case_id = cfg.case_id;
  res.case_label = "Case " + std::to_string(cfg.case_id);
  res.reps = cfg.reps;
  res.config = cfg;
  res.config.times = times;
  for (std::size_t mi = 0; mi < M; ++mi) {
    const auto& model = cfg.models[mi];
    std::size_t failed = 0;
    for (std::size_t rep = 0; rep < reps.size(); ++rep)
      if (!reps[rep].est[mi]) {
        ++failed;
        res.failures.push_back({static_cast<int>(rep), model, reps[rep].error[mi]});
      }
    if (static_cast<double>(failed) > 0.05 * cfg.reps)
      throw NumericalError("benchmark: model " + model + " failed in " + std::to_string(failed) + " of " +
                           std::to_string(cfg.reps) + " replications; first error: " +
                           res.failures.back().message);
    for (std::size_t ti = 0; ti < times.size(); ++ti)
      for (int ei = 0; ei < 3; ++ei) {
        std::vector<double> est;
        for (const auto& r : reps)
          if (r.est[mi]) est.push_back((*r.est[mi])[ti][ei]);
        const auto& tr = truth[ti];
        const double tv = ei == 0 ? tr.nde : ei == 1 ? tr.nie : tr.te;
        const double ts = ei == 0 ? tr.se_nde : ei == 1 ? tr.se_nie : tr.se_te;
        res.rows.push_back(accumulate(model, kEffects[ei], times[ti], tv, ts, est));
        res.estimates[key(model, kEffects[ei], times[ti])] = std::move(est);
      }
  }
  if (timing) {
    timing->total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (std::size_t mi = 0; mi < M; ++mi) {
      double s = 0.0;
      for (const auto& r : reps) s += r.seconds[mi];
      timing->model_seconds[cfg.models[mi]] = s;
    }
  }
  return res;
}

PpcResult ppc(const FittedRegime& regime, const Panel& panel, const std::vector<int>& history, std::uint64_t seed,
              std::size_t max_replicates) {
  if (static_cast<int>(history.size()) != regime.T || history != regime.history)
    throw ValidationError("ppc: regime history does not match the fitted arm sequence");
  if (panel.periods() < regime.T) throw ValidationError("ppc: panel has fewer periods than the regime");
  PpcResult out;
  out.model = regime.model;
  out.history = history;
  for (int t = 1; t <= regime.T; ++t) {
    const CellModel& cell = regime.cell(Role::Outcome, t, history[static_cast<std::size_t>(t - 1)]);
    const auto units = panel.matching(std::span<const int>(history.data(), static_cast<std::size_t>(t)));
    if (units.empty()) throw ValidationError("ppc: no units follow the regime through t " + std::to_string(t));
    std::size_t R = cell.draws.size();
    if (max_replicates > 0) R = std::min(R, max_replicates);
    out.replicates = R;

    const std::size_t n = units.size();
    std::vector<arma::rowvec> x(n);
    std::vector<double> y(n), off(n), med(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto tr = trajectory_of(panel, units[i]);
      x[i] = cell.features.row(tr, regime.scaling);
      y[i] = panel.y(units[i], t);
      off[i] = panel.offset(units[i], t);
      med[i] = panel.m(units[i], t);
    }
    std::vector<double> cuts;
    for (double p : {0.2, 0.4, 0.6, 0.8}) cuts.push_back(stats::quantile(med, p));
    std::vector<int> bin(n);
    for (std::size_t i = 0; i < n; ++i)
      bin[i] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), med[i]) - cuts.begin());
    std::array<double, 5> obs_sum{}, obs_n{};
    for (std::size_t i = 0; i < n; ++i) {
      obs_sum[bin[i]] += y[i];
      obs_n[bin[i]] += 1.0;
    }

    PpcTime pt;
    pt.t = t;
    pt.units = n;
    pt.observed_mean = stats::mean(y);
    std::vector<double> diff(R), binned(R);
    std::vector<std::vector<double>> yrep(R, std::vector<double>(n));
    for (std::size_t r = 0; r < R; ++r) {
      Rng rng = make_rng(seed, {0xcc, static_cast<std::uint64_t>(t), r});
      std::array<double, 5> rep_sum{};
      for (std::size_t i = 0; i < n; ++i) {
        yrep[r][i] = cell.sample(rng, r, x[i], off[i], regime.scaling);
        rep_sum[bin[i]] += yrep[r][i];
      }
      diff[r] = stats::mean(yrep[r]) - pt.observed_mean;
      double s = 0.0;
      int nb = 0;
      for (int b = 0; b < 5; ++b)
        if (obs_n[b] > 0) {
          s += std::abs(rep_sum[b] / obs_n[b] - obs_sum[b] / obs_n[b]);
          ++nb;
        }
      binned[r] = s / nb;
    }
    pt.diff_mean = stats::mean(diff);
    pt.diff_sd = stats::sd(diff);
    pt.diff_mc_se = R > 1 ? stats::batch_means_se(diff) : 0.0;
    pt.abs_diff = std::abs(pt.diff_mean);
    pt.binned_abs_diff = stats::mean(binned);
    pt.binned_mc_se = R > 1 ? stats::batch_means_se(binned) : 0.0;

    Histogram& h = pt.histogram;
    h.lo = *std::min_element(y.begin(), y.end());
    h.hi = *std::max_element(y.begin(), y.end());
    for (const auto& v : yrep) {
      h.lo = std::min(h.lo, *std::min_element(v.begin(), v.end()));
      h.hi = std::max(h.hi, *std::max_element(v.begin(), v.end()));
    }
    constexpr int kBins = 20;
    h.observed.assign(kBins, 0.0);
    h.replicated.assign(kBins, 0.0);
    const double width = h.hi > h.lo ? (h.hi - h.lo) / kBins : 1.0;
    auto slot = [&](double v) { return std::clamp(static_cast<int>((v - h.lo) / width), 0, kBins - 1); };
    for (double v : y) h.observed[slot(v)] += 1.0;
    for (const auto& v : yrep)
      for (double e : v) h.replicated[slot(e)] += 1.0 / static_cast<double>(R);
    out.times.push_back(std::move(pt));
  }
  return out;
}

nlohmann::json to_json(const PpcResult& r) {
  auto times = nlohmann::json::array();
  for (const auto& t : r.times)
    times.push_back({{"t", t.t},
                     {"units", t.units},
                     {"observed_mean", t.observed_mean},
                     {"mean_difference", t.diff_mean},
                     {"mean_difference_sd", t.diff_sd},
                     {"mean_difference_mc_se", t.diff_mc_se},
                     {"abs_mean_difference", t.abs_diff},
                     {"binned_abs_difference", t.binned_abs_diff},
                     {"binned_mc_se", t.binned_mc_se},
                     {"histogram",
                      {{"lo", t.histogram.lo},
                       {"hi", t.histogram.hi},
                       {"observed", t.histogram.observed},
                       {"replicated", t.histogram.replicated}}}});
  return {{"model", r.model}, {"history", r.history}, {"replicates", r.replicates}, {"times", times}};
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::string bench_csv(const BenchResult& result) {
  std::ostringstream os;
  os << "case,model,effect,t,statistic,value\n";
  for (const auto& r : result.rows) {
    const std::pair<const char*, double> stats[] = {
        {"truth", r.truth}, {"truth_se", r.truth_se}, {"bias", r.bias},  {"mse", r.mse},
        {"bias_se", r.bias_se}, {"mse_se", r.mse_se}, {"reps", static_cast<double>(r.reps)}};
    for (const auto& [name, v] : stats)
      os << result.case_id << ',' << r.model << ',' << r.effect << ',' << r.t << ',' << name << ',' << fmt(v) << '\n';
  }
  return os.str();
}

std::vector<std::string> emit_report(const BenchResult& result, const std::string& stem, const std::string& format) {
  if (format != "csv" && format != "json" && format != "both")
    throw ValidationError("report format must be csv, json or both");
  std::vector<std::string> written;
  if (format != "json") {
    const std::string path = stem + ".csv";
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write " + path);
    f << bench_csv(result);
    if (!f) throw ValidationError("cannot write " + path);
    written.push_back(path);
  }
  if (format != "csv") {
    const std::string path = stem + ".json";
    jsonio::write_file(path, to_json(result));
    written.push_back(path);
  }
  return written;
}

}  // namespace medchain
