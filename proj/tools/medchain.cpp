#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "medchain/baselines.hpp"
#include "medchain/csv.hpp"
#include "medchain/dgp.hpp"
#include "medchain/dpm.hpp"
#include "medchain/dynamics.hpp"
#include "medchain/estimands.hpp"
#include "medchain/exposure.hpp"
#include "medchain/harness.hpp"
#include "medchain/json_util.hpp"
#include "medchain/serialize.hpp"
#include "medchain/stats.hpp"

using namespace medchain;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string config;
};

nlohmann::json load_config(const Globals& g) {
  if (g.config.empty()) return nlohmann::json::object();
  auto j = jsonio::read_file(g.config);
  if (!j.is_object()) throw ValidationError(g.config + ": config must be a JSON object");
  return j;
}

// A section of the config keyed by command name, else the whole object.
nlohmann::json section(const nlohmann::json& cfg, const std::string& name) {
  return cfg.contains(name) ? cfg.at(name) : cfg;
}

std::vector<int> parse_history(const std::string& s, int T) {
  if (s.empty()) return std::vector<int>(static_cast<std::size_t>(T), 0);
  std::vector<int> h;
  for (char ch : s) {
    if (ch != '0' && ch != '1') throw ValidationError("history must be a 0/1 string, got '" + s + "'");
    h.push_back(ch - '0');
  }
  if (static_cast<int>(h.size()) != T) throw ValidationError("history length must equal the panel's T");
  return h;
}

std::string checkpoint_dir() {
  const char* d = std::getenv("MEDCHAIN_CHECKPOINT_DIR");
  return d ? std::string(d) : std::string();
}

void warn_all(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string out = "panel.csv";
  std::string truth_out;
  std::optional<std::size_t> n;
  std::optional<int> T;
  std::optional<int> case_id;
  std::size_t truth_n_mc = 100000;
};

void add_simulate(CLI::App& sub, SimulateArgs& a) {
  sub.add_option("--out", a.out, "panel CSV to write");
  sub.add_option("--n", a.n, "number of units");
  sub.add_option("--T", a.T, "number of time points");
  sub.add_option("--case", a.case_id, "effect attenuation case (1, 2, 3)")->check(CLI::Range(1, 3));
  sub.add_option("--truth", a.truth_out, "also write true effects (final-switch contrast per t) to this JSON");
  sub.add_option("--truth-nmc", a.truth_n_mc, "Monte Carlo size of the truth oracle");
}

int run_simulate(const Globals& g, const SimulateArgs& a) {
  const auto cfgj = load_config(g);
  DgpConfig cfg = dgp_config_from_json(section(cfgj, "dgp"));
  cfg.seed = g.seed;
  if (a.n) cfg.n = *a.n;
  if (a.T) cfg.T = *a.T;
  if (a.case_id) cfg.schedule = static_cast<Schedule>(*a.case_id - 1);
  cfg.validate();
  write_panel(a.out, simulate_panel(cfg));
  std::cout << "wrote " << a.out << " (" << cfg.n << " units, T=" << cfg.T << ")\n";
  if (!a.truth_out.empty()) {
    auto arr = nlohmann::json::array();
    for (int t = 1; t <= cfg.T; ++t) {
      const auto c = Contrast::final_switch(t);
      const auto o = true_effects(cfg, c, a.truth_n_mc, derive_seed(g.seed, {0x7a, static_cast<std::uint64_t>(t)}),
                                  g.threads);
      warn_all(o.warnings);
      arr.push_back({{"t", t}, {"contrast", c.to_string()}, {"n_mc", o.n_mc},
                     {"mean_a", o.mean_a}, {"mean_b", o.mean_b}, {"mean_c", o.mean_c},
                     {"nde", o.nde}, {"nie", o.nie}, {"te", o.te},
                     {"se_nde", o.se_nde}, {"se_nie", o.se_nie}, {"se_te", o.se_te}});
    }
    jsonio::write_file(a.truth_out, {{"format", "medchain-truth-v1"}, {"dgp", to_json(cfg)}, {"effects", arr}});
    std::cout << "wrote " << a.truth_out << '\n';
  }
  return 0;
}

// ---- fit ----------------------------------------------------------------------

struct FitArgs {
  std::string panel;
  std::string model = "bnpbdm";
  std::string out = "fit.json";
  std::string profile;
  std::string history;
  std::string design = "onestep";
  bool gaussian = false;
  bool dynamic = false;
  std::string checkpoint_dir;
  std::size_t param_draws = 200;
};

McmcConfig mcmc_from(const nlohmann::json& j, const std::string& profile) {
  McmcConfig m = McmcConfig::desk();
  if (j.contains("profile")) m = McmcConfig::named(j.at("profile").get<std::string>());
  if (j.contains("mcmc")) {
    const auto& x = j.at("mcmc");
    m = {x.at("iterations").get<int>(), x.at("burn_in").get<int>(), x.at("thin").get<int>()};
  }
  if (!profile.empty()) m = McmcConfig::named(profile);
  m.validate();
  return m;
}

int run_fit(const Globals& g, const FitArgs& a) {
  const auto cfgj = section(load_config(g), "fit");
  const PanelRules rules{!a.gaussian};
  const Panel panel = load_panel(a.panel, rules);
  const auto history = parse_history(a.history, panel.periods());
  if (a.dynamic && a.model != "bnpbdm") throw ValidationError("--dynamic applies to the bnpbdm model only");
  FittedRegime regime;
  if (a.model == "reg1" || a.model == "reg2" || a.model == "gam") {
    BaselineOptions bo;
    bo.history = history;
    bo.gaussian_outcome = a.gaussian;
    const auto pf = fit_baselines(panel, parse_baseline(a.model), bo);
    regime = to_regime(pf, a.param_draws, g.seed);
  } else if (a.model == "bnp" || a.model == "bnpbdm") {
    SequentialOptions opts;
    opts.history = history;
    opts.mcmc = mcmc_from(cfgj, a.profile);
    opts.dynamic = a.model == "bnpbdm";
    opts.kind = parse_design_kind(a.design);
    opts.checkpoint_dir = a.checkpoint_dir.empty() ? checkpoint_dir() : a.checkpoint_dir;
    opts.gaussian_outcome = a.gaussian;
    opts.threads = g.threads;
    const auto chain = sequential_fit(panel, opts, g.seed);
    warn_all(chain.warnings);
    regime = to_regime(chain, a.model, derive_seed(g.seed, {0x7e}));
  } else {
    throw ValidationError("unknown model '" + a.model + "' (reg1|reg2|gam|bnp|bnpbdm)");
  }
  warn_all(regime.warnings);
  jsonio::write_file(a.out, to_json(regime));
  std::cout << "wrote " << a.out << " (" << regime.model << ", " << regime.n_draws << " draws)\n";
  return 0;
}

// ---- effects / sensitivity ------------------------------------------------------

struct EffectsArgs {
  std::string fit;
  std::string panel;
  std::vector<std::string> contrasts;
  std::size_t n_mc = 5000;
  std::string out = "effects.json";
  std::vector<double> chi{0.6, 0.8, 1.0, 1.2};
  double kappa = 0.5;
};

std::vector<Contrast> contrasts_for(const EffectsArgs& a, int T) {
  std::vector<Contrast> cs;
  if (a.contrasts.empty())
    for (int t = 1; t <= T; ++t) cs.push_back(Contrast::final_switch(t));
  for (const auto& s : a.contrasts) cs.push_back(Contrast::parse(s));
  return cs;
}

std::string draws_path(const std::string& out) {
  const std::filesystem::path p(out);
  return (p.parent_path() / (p.stem().string() + ".draws.json")).string();
}

FittedRegime load_regime(const std::string& path) { return regime_from_json(jsonio::read_file(path)); }

void print_summary(const EffectEstimate& e, const std::string& label) {
  const auto pr = [](const char* name, const Summary& s) {
    std::cout << "  " << name << " " << s.median << " (" << s.lo95 << ", " << s.hi95 << ")";
  };
  std::cout << label << e.contrast.to_string();
  pr("NDE", e.nde_summary());
  pr("NIE", e.nie_summary());
  pr("TE", e.te_summary());
  std::cout << '\n';
}

int run_effects(const Globals& g, const EffectsArgs& a) {
  const auto regime = load_regime(a.fit);
  const Panel panel = load_panel(a.panel, PanelRules{!regime.scaling.gaussian_outcome});
  auto out = nlohmann::json::array();
  auto draws = nlohmann::json::array();
  const std::string dpath = draws_path(a.out);
  for (const auto& c : contrasts_for(a, regime.T)) {
    const auto e = effects(regime, panel, c, a.n_mc, g.seed, g.threads);
    warn_all(e.warnings);
    print_summary(e, "");
    out.push_back(to_json(e, false, dpath));
    draws.push_back({{"contrast", c.to_string()}, {"draws", effect_draws_json(e)}});
  }
  jsonio::write_file(a.out, {{"format", "medchain-effects-report-v1"}, {"model", regime.model}, {"effects", out}});
  jsonio::write_file(dpath, draws);
  std::cout << "wrote " << a.out << " and " << dpath << '\n';
  return 0;
}

int run_sensitivity(const Globals& g, const EffectsArgs& a) {
  const auto regime = load_regime(a.fit);
  const Panel panel = load_panel(a.panel, PanelRules{!regime.scaling.gaussian_outcome});
  auto out = nlohmann::json::array();
  for (const auto& c : contrasts_for(a, regime.T))
    for (double chi : a.chi) {
      SensitivitySpec spec{chi, a.kappa};
      const auto e = tilted_effects(regime, panel, c, spec, a.n_mc, g.seed, g.threads);
      warn_all(e.warnings);
      std::ostringstream label;
      label << "chi=" << chi << " ";
      print_summary(e, label.str());
      auto j = to_json(e, false);
      j["chi"] = chi;
      j["kappa"] = a.kappa;
      out.push_back(std::move(j));
    }
  jsonio::write_file(a.out, {{"format", "medchain-sensitivity-v1"}, {"model", regime.model}, {"effects", out}});
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

// ---- benchmark -----------------------------------------------------------------

struct BenchArgs {
  std::optional<int> case_id;
  std::vector<std::string> models;
  std::optional<int> reps;
  std::optional<std::size_t> n;
  std::string profile;
  std::vector<int> times;
  std::optional<std::size_t> n_mc;
  std::string out = "bench";
  std::string format = "both";
};

int run_bench(const Globals& g, const BenchArgs& a) {
  BenchConfig cfg = bench_config_from_json(section(load_config(g), "benchmark"));
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  if (a.case_id) cfg.case_id = *a.case_id;
  if (!a.models.empty()) cfg.models = a.models;
  if (a.reps) cfg.reps = *a.reps;
  if (a.n) cfg.n = *a.n;
  if (!a.profile.empty()) {
    cfg.profile = a.profile;
    cfg.mcmc = McmcConfig::named(a.profile);
  }
  if (!a.times.empty()) cfg.times = a.times;
  if (a.n_mc) cfg.n_mc = *a.n_mc;
  BenchTiming timing;
  const auto res = run_benchmark(cfg, &timing);
  for (const auto& f : res.failures)
    std::cerr << "replication " << f.rep << " (" << f.model << ") failed: " << f.message << '\n';
  for (const auto& r : res.rows)
    std::cout << r.model << " " << r.effect << " t=" << r.t << " bias " << r.bias << " (" << r.bias_se << ") mse "
              << r.mse << " (" << r.mse_se << ") truth " << r.truth << '\n';
  for (const auto& p : emit_report(res, a.out, a.format)) std::cout << "wrote " << p << '\n';
  std::cout << "total " << timing.total_seconds << " s\n";
  return 0;
}

// ---- ppc -----------------------------------------------------------------------

struct PpcArgs {
  std::string fit;
  std::string panel;
  std::string out = "ppc.json";
  std::size_t replicates = 0;
};

int run_ppc(const Globals& g, const PpcArgs& a) {
  const auto regime = load_regime(a.fit);
  const Panel panel = load_panel(a.panel, PanelRules{!regime.scaling.gaussian_outcome});
  const auto r = ppc(regime, panel, regime.history, g.seed, a.replicates);
  for (const auto& t : r.times)
    std::cout << "t=" << t.t << " " << t.abs_diff << " (" << t.diff_sd << ")\n";
  jsonio::write_file(a.out, to_json(r));
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

// ---- exposure ------------------------------------------------------------------

struct ExposureArgs {
  std::string emissions;
  std::string links;
  std::vector<int> months;
  std::optional<double> cutoff;
  bool raw = false;
  std::string out = "exposure.csv";
};

int run_exposure(const Globals&, const ExposureArgs& a) {
  const auto em = load_emissions(a.emissions);
  const auto ln = load_links(a.links);
  std::set<int> months(a.months.begin(), a.months.end());
  if (months.empty())
    for (const auto& e : em) months.insert(e.month);
  const auto levels = compute_exposure(em, ln, months, !a.raw);
  const double cut = a.cutoff ? *a.cutoff : median_level(levels);
  const auto arms = dichotomize(levels, cut);
  csv::Table t;
  t.header = {"zip_id", "level", "Z"};
  for (const auto& [zip, level] : levels)
    t.rows.push_back({zip, csv::format_double(level), std::to_string(arms.at(zip))});
  csv::write(a.out, t);
  std::cout << "wrote " << a.out << " (" << levels.size() << " zips, cutoff " << cut << ")\n";
  return 0;
}

// ---- dpm fit -------------------------------------------------------------------

struct DpmArgs {
  std::string data;
  std::string kernel = "normal";
  std::string response = "y";
  std::string offset;
  std::string profile;
  std::string out = "dpm.json";
};

int run_dpm_fit(const Globals& g, const DpmArgs& a) {
  const auto cfgj = section(load_config(g), "dpm");
  const auto tab = csv::read(a.data);
  const auto yi = tab.column(a.response);
  if (!yi) throw ValidationError(a.data + ": no response column '" + a.response + "'");
  std::optional<std::size_t> oi;
  if (!a.offset.empty()) {
    oi = tab.column(a.offset);
    if (!oi) throw ValidationError(a.data + ": no offset column '" + a.offset + "'");
  }
  std::vector<std::size_t> xcols;
  for (std::size_t c = 0; c < tab.header.size(); ++c)
    if (c != *yi && (!oi || c != *oi)) xcols.push_back(c);
  const std::size_t n = tab.rows.size();
  arma::vec y(n), off(n, arma::fill::ones);
  arma::mat X(n, xcols.size() + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ctx = a.data + " row " + std::to_string(i + 2);
    y(i) = csv::parse_double(tab.rows[i][*yi], ctx);
    if (oi) off(i) = csv::parse_double(tab.rows[i][*oi], ctx);
    X(i, 0) = 1.0;
    for (std::size_t k = 0; k < xcols.size(); ++k) X(i, k + 1) = csv::parse_double(tab.rows[i][xcols[k]], ctx);
  }
  const auto mcmc = mcmc_from(cfgj, a.profile);
  const Kernel kernel = parse_kernel(a.kernel);
  DpPrior prior;
  DpmFit fit;
  if (kernel == Kernel::Normal) {
    const auto ls = glm::fit_linear(X, y, arma::zeros(X.n_cols));
    prior = DpPrior::centered(ls.coef);
    fit = fit_normal_dpm(y, X, prior, mcmc, g.seed);
  } else {
    const auto pf = glm::fit_poisson(X, y, off, arma::zeros(X.n_cols));
    prior = DpPrior::centered(pf.coef);
    fit = fit_poisson_dpm(y, off, X, prior, mcmc, g.seed);
  }
  warn_all(fit.warnings);
  jsonio::write_file(a.out, to_json(fit));
  std::cout << "wrote " << a.out << " (" << fit.draws.size() << " retained draws)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-varying mediation analysis with Dirichlet-process mixture models"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "JSON configuration file");

  SimulateArgs sim;
  add_simulate(*app.add_subcommand("simulate", "simulate a panel from the synthetic DGP"), sim);
  auto* dgp = app.add_subcommand("dgp", "data-generating process");
  dgp->require_subcommand(1);
  SimulateArgs dsim;
  add_simulate(*dgp->add_subcommand("simulate", "simulate a panel from the synthetic DGP"), dsim);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "fit conditional models along a treatment history");
  fit->add_option("--panel", fa.panel, "panel CSV")->required();
  fit->add_option("--model", fa.model, "reg1|reg2|gam|bnp|bnpbdm");
  fit->add_option("--out", fa.out, "fit JSON to write");
  fit->add_option("--profile", fa.profile, "MCMC profile (desk|paper)");
  fit->add_option("--history", fa.history, "base treatment history, e.g. 0000");
  fit->add_option("--design", fa.design, "onestep|full|intercept");
  fit->add_flag("--gaussian-outcome", fa.gaussian, "continuous outcome with a normal kernel");
  fit->add_flag("--dynamic", fa.dynamic, "dynamic base-measure updating (the bnpbdm default, stated explicitly)");
  fit->add_option("--checkpoint-dir", fa.checkpoint_dir, "per-(t, arm) checkpoints; overrides MEDCHAIN_CHECKPOINT_DIR");
  fit->add_option("--param-draws", fa.param_draws, "coefficient draws for regression models");

  EffectsArgs ea;
  auto* eff = app.add_subcommand("effects", "natural direct, indirect and total effects");
  eff->add_option("--fit", ea.fit, "fit JSON")->required();
  eff->add_option("--panel", ea.panel, "panel CSV")->required();
  eff->add_option("--contrast", ea.contrasts, "e.g. 0001v0000 (repeatable; default final switch at every t)");
  eff->add_option("--nmc", ea.n_mc, "forward paths per posterior draw");
  eff->add_option("--out", ea.out, "effects JSON to write");

  EffectsArgs sa;
  auto* sens = app.add_subcommand("sensitivity", "exponential-tilt sensitivity analysis");
  sens->add_option("--fit", sa.fit, "fit JSON")->required();
  sens->add_option("--panel", sa.panel, "panel CSV")->required();
  sens->add_option("--contrast", sa.contrasts, "e.g. 0001v0000 (repeatable)");
  sens->add_option("--chi", sa.chi, "tilt parameters")->delimiter(',');
  sens->add_option("--kappa", sa.kappa, "threshold multiplier of SD(d)");
  sens->add_option("--nmc", sa.n_mc, "forward paths per posterior draw");
  sens->add_option("--out", sa.out, "JSON to write");
  sa.out = "sensitivity.json";

  BenchArgs ba;
  auto* bench = app.add_subcommand("benchmark", "simulation replication study");
  bench->add_option("--case", ba.case_id, "1|2|3")->check(CLI::Range(1, 3));
  bench->add_option("--models", ba.models, "comma list of reg1,reg2,gam,bnp,bnpbdm,oracle")->delimiter(',');
  bench->add_option("--reps", ba.reps, "replications");
  bench->add_option("--n", ba.n, "units per replication");
  bench->add_option("--profile", ba.profile, "MCMC profile (desk|paper)");
  bench->add_option("--times", ba.times, "time points to evaluate")->delimiter(',');
  bench->add_option("--nmc", ba.n_mc, "forward paths per posterior draw");
  bench->add_option("--out", ba.out, "output path stem");
  bench->add_option("--format", ba.format, "csv|json|both");

  PpcArgs pa;
  auto* ppcc = app.add_subcommand("ppc", "posterior predictive check");
  ppcc->add_option("--fit", pa.fit, "fit JSON")->required();
  ppcc->add_option("--panel", pa.panel, "panel CSV")->required();
  ppcc->add_option("--out", pa.out, "JSON to write");
  ppcc->add_option("--replicates", pa.replicates, "cap on posterior replicates (0 = all)");

  ExposureArgs xa;
  auto* expo = app.add_subcommand("exposure", "zip-level exposure from plant emissions and linkage weights");
  expo->add_option("--emissions", xa.emissions, "CSV plant_id,month,E")->required();
  expo->add_option("--links", xa.links, "CSV plant_id,zip_id,month,W_link")->required();
  expo->add_option("--months", xa.months, "months to include (default all)")->delimiter(',');
  expo->add_option("--cutoff", xa.cutoff, "dichotomization cutoff (default median)");
  expo->add_flag("--raw", xa.raw, "use E instead of log E");
  expo->add_option("--out", xa.out, "CSV to write");

  DpmArgs da;
  auto* dpm = app.add_subcommand("dpm", "single-cell DPM regression");
  dpm->require_subcommand(1);
  auto* dfit = dpm->add_subcommand("fit", "fit a DPM regression to a CSV");
  dfit->add_option("--data", da.data, "CSV with response and predictors")->required();
  dfit->add_option("--kernel", da.kernel, "normal|poisson")->check(CLI::IsMember({"normal", "poisson"}));
  dfit->add_option("--response", da.response, "response column");
  dfit->add_option("--offset", da.offset, "offset column (poisson)");
  dfit->add_option("--profile", da.profile, "MCMC profile (desk|paper)");
  dfit->add_option("--out", da.out, "fit JSON to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*app.get_subcommand("simulate")) return run_simulate(g, sim);
    if (*dgp) return run_simulate(g, dsim);
    if (*fit) return run_fit(g, fa);
    if (*eff) return run_effects(g, ea);
    if (*sens) return run_sensitivity(g, sa);
    if (*bench) return run_bench(g, ba);
    if (*ppcc) return run_ppc(g, pa);
    if (*expo) return run_exposure(g, xa);
    if (*dpm) return run_dpm_fit(g, da);
  } catch (const PanelValidationError& e) {
    std::cerr << "validation error:\n" << e.report().to_string() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
