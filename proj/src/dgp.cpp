#include "medchain/dgp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "medchain/common.hpp"
#include "medchain/stats.hpp"

namespace medchain {

Schedule parse_schedule(const std::string& label) {
  if (label == "case1" || label == "1" || label == "Case1") return Schedule::Case1;
  if (label == "case2" || label == "2" || label == "Case2") return Schedule::Case2;
  if (label == "case3" || label == "3" || label == "Case3") return Schedule::Case3;
  throw ValidationError("unknown attenuation schedule '" + label + "' (expected case1, case2 or case3)");
}

std::string schedule_label(Schedule s) {
  switch (s) {
    case Schedule::Case1: return "case1";
    case Schedule::Case2: return "case2";
    case Schedule::Case3: return "case3";
  }
  return "case1";
}

double schedule_factor(Schedule s, int t) {
  if (t < 1) throw ValidationError("schedule_factor: t must be >= 1");
  double f = 1.0;
  for (int k = 2; k <= t; ++k) {
    switch (s) {
      case Schedule::Case1: f *= 0.85; break;
      case Schedule::Case2: f *= 0.70; break;
      case Schedule::Case3: {
        static constexpr double steps[3] = {0.70, 1.15, 0.80};
        f *= steps[(k - 2) % 3];
        break;
      }
    }
  }
  return f;
}

std::vector<std::vector<double>> attenuate(const std::vector<double>& base, Schedule s, int periods) {
  std::vector<std::vector<double>> out;
  for (int t = 1; t <= periods; ++t) {
    const double f = schedule_factor(s, t);
    std::vector<double> row;
    for (double b : base) row.push_back(b * f);
    out.push_back(std::move(row));
  }
  return out;
}

double lagged_coefficient(double base, Schedule s, int t, int lag) {
  if (t - lag < 1) return 0.0;
  return base * schedule_factor(s, t - lag) / std::pow(10.0, lag);
}

void DgpConfig::validate() const {
  if (n < 1) throw ValidationError("dgp: n must be >= 1");
  if (T < 1) throw ValidationError("dgp: T must be >= 1");
  if (!(xi > 0.0)) throw ValidationError("dgp: skew-normal scale xi must be > 0");
  if (!(c > 0.0)) throw ValidationError("dgp: c must be > 0");
  if (!(confounder.variance > 0.0)) throw ValidationError("dgp: confounder mixture variance must be > 0");
  if (identity_outcome && !(outcome_sd > 0.0)) throw ValidationError("dgp: outcome_sd must be > 0");
  const std::size_t k = covariate_names.size();
  if (centres.v.size() != k || confounder.v.size() != k || mediator.v.size() != k || outcome.v.size() != k ||
      treatment.v.size() != k)
    throw ValidationError("dgp: every V coefficient block must have one entry per covariate");
  if (k != 2) throw ValidationError("dgp: the baseline generator produces exactly two covariates");
  if (treatment.intercepts.empty()) throw ValidationError("dgp: treatment intercepts must be nonempty");
}

namespace {

using nlohmann::json;

template <class T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

DgpConfig dgp_config_from_json(const json& j, DgpConfig cfg) {
  try {
    maybe(j, "n", cfg.n);
    maybe(j, "T", cfg.T);
    if (j.contains("schedule")) cfg.schedule = parse_schedule(j.at("schedule").get<std::string>());
    if (j.contains("case")) cfg.schedule = parse_schedule(std::to_string(j.at("case").get<int>()));
    maybe(j, "seed", cfg.seed);
    maybe(j, "xi", cfg.xi);
    maybe(j, "psi", cfg.psi);
    maybe(j, "c", cfg.c);
    if (j.contains("outcome_link")) {
      const auto link = j.at("outcome_link").get<std::string>();
      if (link != "log" && link != "identity") throw ValidationError("dgp: outcome_link must be log or identity");
      cfg.identity_outcome = link == "identity";
    }
    maybe(j, "outcome_sd", cfg.outcome_sd);
    maybe(j, "covariate_names", cfg.covariate_names);
    if (j.contains("centres")) {
      const auto& b = j.at("centres");
      maybe(b, "x", cfg.centres.x);
      maybe(b, "m", cfg.centres.m);
      maybe(b, "log_y", cfg.centres.log_y);
      maybe(b, "v", cfg.centres.v);
    }
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      maybe(b, "x0_mean", cfg.baseline.x0_mean);
      maybe(b, "x0_sd", cfg.baseline.x0_sd);
      maybe(b, "m0_mean", cfg.baseline.m0_mean);
      maybe(b, "m0_sd", cfg.baseline.m0_sd);
      maybe(b, "offset_log_mean", cfg.baseline.offset_log_mean);
      maybe(b, "offset_log_sd", cfg.baseline.offset_log_sd);
      maybe(b, "offset_jitter_sd", cfg.baseline.offset_jitter_sd);
      maybe(b, "urban_a", cfg.baseline.urban_a);
      maybe(b, "urban_b", cfg.baseline.urban_b);
      maybe(b, "elevation_shape", cfg.baseline.elevation_shape);
      maybe(b, "elevation_rate", cfg.baseline.elevation_rate);
    }
    if (j.contains("confounder")) {
      const auto& b = j.at("confounder");
      if (b.contains("intercepts")) {
        const auto v = b.at("intercepts").get<std::vector<double>>();
        if (v.size() != 2) throw ValidationError("dgp: confounder.intercepts needs two mixture components");
        cfg.confounder.intercept_a = v[0];
        cfg.confounder.intercept_b = v[1];
      }
      maybe(b, "m", cfg.confounder.m);
      maybe(b, "z", cfg.confounder.z);
      maybe(b, "x", cfg.confounder.x);
      maybe(b, "v", cfg.confounder.v);
      maybe(b, "variance", cfg.confounder.variance);
    }
    if (j.contains("mediator")) {
      const auto& b = j.at("mediator");
      maybe(b, "intercept", cfg.mediator.intercept);
      maybe(b, "m", cfg.mediator.m);
      maybe(b, "z", cfg.mediator.z);
      maybe(b, "x", cfg.mediator.x);
      maybe(b, "v", cfg.mediator.v);
    }
    if (j.contains("outcome")) {
      const auto& b = j.at("outcome");
      maybe(b, "intercept", cfg.outcome.intercept);
      maybe(b, "m", cfg.outcome.m);
      maybe(b, "z", cfg.outcome.z);
      maybe(b, "log_y", cfg.outcome.log_y);
      maybe(b, "x", cfg.outcome.x);
      maybe(b, "mz", cfg.outcome.mz);
      maybe(b, "mx", cfg.outcome.mx);
      maybe(b, "v", cfg.outcome.v);
    }
    if (j.contains("treatment")) {
      const auto& b = j.at("treatment");
      maybe(b, "intercepts", cfg.treatment.intercepts);
      maybe(b, "z", cfg.treatment.z);
      maybe(b, "x", cfg.treatment.x);
      maybe(b, "v", cfg.treatment.v);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("dgp config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const DgpConfig& cfg) {
  return json{
      {"n", cfg.n},
      {"T", cfg.T},
      {"schedule", schedule_label(cfg.schedule)},
      {"seed", cfg.seed},
      {"xi", cfg.xi},
      {"psi", cfg.psi},
      {"c", cfg.c},
      {"outcome_link", cfg.identity_outcome ? "identity" : "log"},
      {"outcome_sd", cfg.outcome_sd},
      {"covariate_names", cfg.covariate_names},
      {"centres", {{"x", cfg.centres.x}, {"m", cfg.centres.m}, {"log_y", cfg.centres.log_y}, {"v", cfg.centres.v}}},
      {"baseline",
       {{"x0_mean", cfg.baseline.x0_mean},
        {"x0_sd", cfg.baseline.x0_sd},
        {"m0_mean", cfg.baseline.m0_mean},
        {"m0_sd", cfg.baseline.m0_sd},
        {"offset_log_mean", cfg.baseline.offset_log_mean},
        {"offset_log_sd", cfg.baseline.offset_log_sd},
        {"offset_jitter_sd", cfg.baseline.offset_jitter_sd},
        {"urban_a", cfg.baseline.urban_a},
        {"urban_b", cfg.baseline.urban_b},
        {"elevation_shape", cfg.baseline.elevation_shape},
        {"elevation_rate", cfg.baseline.elevation_rate}}},
      {"confounder",
       {{"intercepts", {cfg.confounder.intercept_a, cfg.confounder.intercept_b}},
        {"m", cfg.confounder.m},
        {"z", cfg.confounder.z},
        {"x", cfg.confounder.x},
        {"v", cfg.confounder.v},
        {"variance", cfg.confounder.variance}}},
      {"mediator",
       {{"intercept", cfg.mediator.intercept},
        {"m", cfg.mediator.m},
        {"z", cfg.mediator.z},
        {"x", cfg.mediator.x},
        {"v", cfg.mediator.v}}},
      {"outcome",
       {{"intercept", cfg.outcome.intercept},
        {"m", cfg.outcome.m},
        {"z", cfg.outcome.z},
        {"log_y", cfg.outcome.log_y},
        {"x", cfg.outcome.x},
        {"mz", cfg.outcome.mz},
        {"mx", cfg.outcome.mx},
        {"v", cfg.outcome.v}}},
      {"treatment",
       {{"intercepts", cfg.treatment.intercepts},
        {"z", cfg.treatment.z},
        {"x", cfg.treatment.x},
        {"v", cfg.treatment.v}}},
  };
}

DgpConfig load_dgp_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("dgp config: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("dgp config '" + path + "': " + e.what());
  }
  return dgp_config_from_json(j);
}

namespace {

// Full simulated history of one unit; index 0 holds baselines.
struct History {
  std::vector<double> x, m, y;
  std::vector<int> z;
  std::vector<double> offset;
  double v[2] = {0.0, 0.0};

  explicit History(int T)
      : x(T + 1, 0.0), m(T + 1, 0.0), y(T + 1, 0.0), z(T + 1, 0), offset(T + 1, 1.0) {}
};

class Generator {
 public:
  explicit Generator(const DgpConfig& cfg) : cfg_(cfg) {}

  double ly(double y) const { return cfg_.identity_outcome ? y : std::log(y + cfg_.c); }

  double v_term(const std::vector<double>& coef, const History& h) const {
    double s = 0.0;
    for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * (h.v[j] - cfg_.centres.v[j]);
    return s;
  }

  double lag(double base, int t, int lag_steps) const {
    return lagged_coefficient(base, cfg_.schedule, t, lag_steps);
  }

  // Common part of both mixture components (everything but the intercept).
  double confounder_slopes(const History& h, int t) const {
    const auto& a = cfg_.confounder;
    double s = v_term(a.v, h);
    if (t == 1) {
      s += a.m * (h.m[0] - cfg_.centres.m) + a.x * (h.x[0] - cfg_.centres.x);
      return s;
    }
    for (int k = 1; k <= t - 1; ++k) {
      const int l = t - 1 - k;
      s += lag(a.m, t, l) * (h.m[k] - cfg_.centres.m);
      s += lag(a.z, t, l) * h.z[k];
      s += lag(a.x, t, l) * (h.x[k] - cfg_.centres.x);
    }
    return s;
  }

  MixtureMoments confounder_moments(const History& h, int t) const {
    const double s = confounder_slopes(h, t);
    const double la = cfg_.confounder.intercept_a + s, lb = cfg_.confounder.intercept_b + s;
    const double mean = 0.5 * (la + lb);
    return {mean, cfg_.confounder.variance + 0.25 * (la - lb) * (la - lb)};
  }

  double draw_confounder(Rng& rng, const History& h, int t) const {
    const double s = confounder_slopes(h, t);
    const double base = stats::runif(rng) < 0.5 ? cfg_.confounder.intercept_a : cfg_.confounder.intercept_b;
    return stats::rnorm(rng, base + s, std::sqrt(cfg_.confounder.variance));
  }

  // Mediator location with Z(t) = zt.
  double mediator_location(const History& h, int t, int zt) const {
    const auto& b = cfg_.mediator;
    double s = b.intercept + v_term(b.v, h);
    for (int k = 0; k <= t - 1; ++k) s += lag(b.m, t, t - 1 - k) * (h.m[k] - cfg_.centres.m);
    for (int k = 1; k <= t; ++k) {
      const int zk = k == t ? zt : h.z[k];
      s += lag(b.z, t, t - k) * zk;
      s += lag(b.x, t, t - k) * (h.x[k] - cfg_.centres.x);
    }
    return s;
  }

  // Outcome linear predictor (log rate or identity mean) with M(t) = mt, Z(t) = zt.
  double outcome_eta(const History& h, int t, double mt, int zt) const {
    const auto& g = cfg_.outcome;
    double s = g.intercept + v_term(g.v, h);
    for (int k = 1; k <= t; ++k) {
      const double mk = k == t ? mt : h.m[k];
      const int zk = k == t ? zt : h.z[k];
      s += lag(g.m, t, t - k) * (mk - cfg_.centres.m);
      s += lag(g.z, t, t - k) * zk;
      s += lag(g.x, t, t - k) * (h.x[k] - cfg_.centres.x);
    }
    for (int k = 0; k <= t - 1; ++k) s += lag(g.log_y, t, t - 1 - k) * (ly(h.y[k]) - cfg_.centres.log_y);
    s += g.mz * (mt - cfg_.centres.m) * zt;
    s += g.mx * (mt - cfg_.centres.m) * (h.x[t] - cfg_.centres.x);
    return s;
  }

  double treatment_probability(const History& h, int t) const {
    const auto& d = cfg_.treatment;
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(t - 1), d.intercepts.size() - 1);
    double s = d.intercepts[idx] + v_term(d.v, h);
    for (int k = 1; k <= t - 1; ++k) s += d.z * std::pow(10.0, -(t - 1 - k)) * h.z[k];
    for (int k = 1; k <= t; ++k) s += d.x * std::pow(10.0, -(t - k)) * (h.x[k] - cfg_.centres.x);
    return 1.0 / (1.0 + std::exp(-s));
  }

  double draw_outcome(Rng& rng, const History& h, int t, double eta, std::size_t unit) const {
    if (cfg_.identity_outcome) return eta + cfg_.outcome_sd * stats::rnorm(rng);
    return checked_poisson(rng, h.offset[t] * std::exp(eta), eta, t, unit);
  }

  void draw_baseline(Rng& rng, History& h, int T, std::size_t unit) const {
    const auto& b = cfg_.baseline;
    h.v[0] = stats::rbeta(rng, b.urban_a, b.urban_b);
    h.v[1] = stats::rgamma(rng, b.elevation_shape, b.elevation_rate);
    h.x[0] = stats::rnorm(rng, b.x0_mean, b.x0_sd);
    h.m[0] = stats::rnorm(rng, b.m0_mean, b.m0_sd);
    const double base_offset = std::exp(stats::rnorm(rng, b.offset_log_mean, b.offset_log_sd));
    for (int t = 1; t <= T; ++t) h.offset[t] = base_offset * std::exp(b.offset_jitter_sd * stats::rnorm(rng));
    if (cfg_.identity_outcome)
      h.y[0] = cfg_.outcome.intercept + cfg_.outcome_sd * stats::rnorm(rng);
    else
      h.y[0] = checked_poisson(rng, base_offset * std::exp(cfg_.outcome.intercept), cfg_.outcome.intercept, 0, unit);
  }

  double checked_poisson(Rng& rng, double mean, double eta, int t, std::size_t unit) const {
    // std::poisson_distribution degrades badly long before double overflow
    if (!std::isfinite(mean) || mean > 1e9) {
      std::ostringstream msg;
      msg << "dgp: Poisson mean overflow at (unit " << unit << ", t " << t << "): mean " << mean
          << " from log-rate " << eta << " with outcome coefficients intercept=" << cfg_.outcome.intercept
          << " m=" << cfg_.outcome.m << " z=" << cfg_.outcome.z << " log_y=" << cfg_.outcome.log_y
          << " x=" << cfg_.outcome.x << " mz=" << cfg_.outcome.mz << " mx=" << cfg_.outcome.mx;
      throw NumericalError(msg.str());
    }
    return static_cast<double>(stats::rpoisson(rng, mean));
  }

  double mediator_noise(Rng& rng) const { return stats::rskewnormal(rng, 0.0, cfg_.xi, cfg_.psi); }

  double rate(double eta) const { return cfg_.identity_outcome ? eta : 200.0 * std::exp(eta); }

 private:
  const DgpConfig& cfg_;
};

History history_of(const Panel& p, std::size_t u) {
  History h(p.periods());
  for (int t = 0; t <= p.periods(); ++t) {
    h.x[t] = p.w(u, t);
    h.m[t] = p.m(u, t);
    h.y[t] = p.y(u, t);
    if (t > 0) {
      h.z[t] = p.z(u, t);
      h.offset[t] = p.offset(u, t);
    }
  }
  for (std::size_t j = 0; j < 2 && j < p.covariates(); ++j) h.v[j] = p.v(u)[j];
  return h;
}

}  // namespace

Panel simulate_panel(const DgpConfig& cfg) {
  cfg.validate();
  Generator gen(cfg);
  Panel p(cfg.n, cfg.T, cfg.covariate_names);
  Rng rng = make_rng(cfg.seed, {0x5151});
  for (std::size_t u = 0; u < cfg.n; ++u) {
    History h(cfg.T);
    gen.draw_baseline(rng, h, cfg.T, u);
    for (int t = 1; t <= cfg.T; ++t) {
      h.x[t] = gen.draw_confounder(rng, h, t);
      h.z[t] = stats::rbernoulli(rng, gen.treatment_probability(h, t)) ? 1 : 0;
      h.m[t] = gen.mediator_location(h, t, h.z[t]) + gen.mediator_noise(rng);
      h.y[t] = gen.draw_outcome(rng, h, t, gen.outcome_eta(h, t, h.m[t], h.z[t]), u);
    }
    p.unit_id(u) = "u" + std::to_string(u + 1);
    for (std::size_t j = 0; j < 2; ++j) p.v(u, j) = h.v[j];
    for (int t = 0; t <= cfg.T; ++t) {
      p.w(u, t) = h.x[t];
      p.m(u, t) = h.m[t];
      p.y(u, t) = h.y[t];
      if (t > 0) {
        p.z(u, t) = h.z[t];
        p.offset(u, t) = h.offset[t];
      }
    }
  }
  return p;
}

MixtureMoments confounder_moments(const DgpConfig& cfg, const Panel& panel, std::size_t unit, int t) {
  if (t < 1 || t > panel.periods()) throw ValidationError("confounder_moments: t out of range");
  return Generator(cfg).confounder_moments(history_of(panel, unit), t);
}

TruthOracle true_effects(const DgpConfig& cfg, const Contrast& contrast, std::size_t n_mc, std::uint64_t seed,
                         int threads) {
  cfg.validate();
  contrast.validate();
  const int t = contrast.t();
  if (t > cfg.T) throw ValidationError("true_effects: contrast length exceeds T");
  if (n_mc < 2) throw ValidationError("true_effects: n_mc must be >= 2");
  Generator gen(cfg);

  constexpr std::size_t chunk = 4096;
  const std::size_t chunks = (n_mc + chunk - 1) / chunk;
  std::vector<double> a(n_mc), b(n_mc), c(n_mc);
  parallel_for(chunks, threads, [&](std::size_t ci) {
    Rng rng = make_rng(seed, {0x7a7a, ci});
    const std::size_t lo = ci * chunk, hi = std::min(n_mc, lo + chunk);
    for (std::size_t i = lo; i < hi; ++i) {
      History h(t);
      gen.draw_baseline(rng, h, t, i);
      for (int s = 1; s < t; ++s) {
        h.x[s] = gen.draw_confounder(rng, h, s);
        h.z[s] = contrast.treated[s - 1];
        h.m[s] = gen.mediator_location(h, s, h.z[s]) + gen.mediator_noise(rng);
        h.y[s] = gen.draw_outcome(rng, h, s, gen.outcome_eta(h, s, h.m[s], h.z[s]), i);
      }
      h.x[t] = gen.draw_confounder(rng, h, t);
      const int zt = contrast.treated.back(), zr = contrast.reference.back();
      const double e = gen.mediator_noise(rng);
      const double m_z = gen.mediator_location(h, t, zt) + e;
      const double m_r = gen.mediator_location(h, t, zr) + e;
      a[i] = gen.rate(gen.outcome_eta(h, t, m_z, zt));
      b[i] = gen.rate(gen.outcome_eta(h, t, m_r, zt));
      c[i] = gen.rate(gen.outcome_eta(h, t, m_r, zr));
    }
  });

  TruthOracle o;
  o.t = t;
  o.n_mc = n_mc;
  std::vector<double> nde(n_mc), nie(n_mc), te(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) {
    nde[i] = b[i] - c[i];
    nie[i] = a[i] - b[i];
    te[i] = a[i] - c[i];
  }
  o.mean_a = stats::mean(a);
  o.mean_b = stats::mean(b);
  o.mean_c = stats::mean(c);
  o.nde = stats::mean(nde);
  o.nie = stats::mean(nie);
  o.te = stats::mean(te);
  const double rn = std::sqrt(static_cast<double>(n_mc));
  o.se_nde = stats::sd(nde) / rn;
  o.se_nie = stats::sd(nie) / rn;
  o.se_te = stats::sd(te) / rn;
  if (n_mc < 1000) o.warnings.push_back("n_mc < 1000: Monte Carlo standard errors are unreliable");
  return o;
}

}  // namespace medchain
