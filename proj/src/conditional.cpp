#include "medchain/conditional.hpp"

#include <cmath>

#include "medchain/json_util.hpp"
#include "medchain/stats.hpp"

namespace medchain {

arma::rowvec Featurizer::expand(const arma::rowvec& base) const {
  if (splines.empty()) return base;
  std::size_t extra = 0;
  for (const auto& s : splines) extra += s.basis.size();
  arma::rowvec out(base.n_elem + extra);
  out.head(base.n_elem) = base;
  std::size_t at = base.n_elem;
  for (const auto& s : splines) {
    const double x = base[s.column];
    const arma::rowvec b = s.basis.eval(x);
    const arma::rowvec z{1.0, x};
    out.subvec(at, at + b.n_elem - 1) = b - z * s.projection;
    at += b.n_elem;
  }
  return out;
}

arma::rowvec Featurizer::row(const Trajectory& tr, const Scaling& sc) const {
  return expand(design_row(kind, role, t, tr, sc));
}

double CellModel::sample(Rng& rng, std::size_t r, const arma::rowvec& x, double offset, const Scaling& sc) const {
  const auto& d = draws[r];
  const std::size_t k = stats::sample_weights(rng, d.weights);
  const double eta = arma::dot(x, d.beta.row(k));
  if (family == Family::Poisson) return static_cast<double>(stats::rpoisson(rng, offset * std::exp(eta)));
  return data_response(role, eta + std::sqrt(d.sigma2[k]) * stats::rnorm(rng), sc);
}

void CellModel::component_means(std::size_t r, const arma::rowvec& x, double offset, const Scaling& sc,
                                std::vector<double>& out) const {
  const auto& d = draws[r];
  out.resize(d.weights.size());
  for (std::size_t k = 0; k < d.weights.size(); ++k) {
    const double eta = arma::dot(x, d.beta.row(k));
    out[k] = family == Family::Poisson ? offset * std::exp(eta) : data_response(role, eta, sc);
  }
}

double CellModel::mean(std::size_t r, const arma::rowvec& x, double offset, const Scaling& sc) const {
  const auto& d = draws[r];
  double m = 0.0;
  for (std::size_t k = 0; k < d.weights.size(); ++k) {
    const double eta = arma::dot(x, d.beta.row(k));
    m += d.weights[k] * (family == Family::Poisson ? offset * std::exp(eta) : data_response(role, eta, sc));
  }
  return m;
}

const CellModel& FittedRegime::cell(Role role, int t, int arm) const {
  auto it = cells.find({static_cast<int>(role), t, arm});
  if (it == cells.end())
    throw ValidationError(std::string("missing fit for cell (model ") + role_name(role) + ", arm " +
                          std::to_string(arm) + ", t " + std::to_string(t) + ") in regime '" + model + "'");
  return it->second;
}

bool FittedRegime::has(Role role, int t, int arm) const {
  return cells.count({static_cast<int>(role), t, arm}) > 0;
}

void FittedRegime::add(CellModel c) {
  if (n_draws == 0) n_draws = c.draws.size();
  if (c.draws.size() != n_draws)
    throw ValidationError("regime: every cell must carry the same number of posterior draws");
  const CellKey key{static_cast<int>(c.role), c.t, c.arm};
  cells[key] = std::move(c);
}

std::vector<MixtureDraw> mixture_draws(const DpmFit& fit, std::uint64_t seed, bool include_new_cluster) {
  std::vector<MixtureDraw> out;
  out.reserve(fit.draws.size());
  const double nn = static_cast<double>(fit.n);
  for (std::size_t r = 0; r < fit.draws.size(); ++r) {
    const auto& d = fit.draws[r];
    const auto counts = d.counts();
    const std::size_t K = d.clusters();
    const std::size_t C = include_new_cluster ? K + 1 : K;
    const double denom = include_new_cluster ? nn + d.mass : nn;
    MixtureDraw m;
    m.beta.set_size(C, fit.p);
    m.beta.rows(0, K - 1) = d.beta;
    m.weights.resize(C);
    for (std::size_t k = 0; k < K; ++k) m.weights[k] = static_cast<double>(counts[k]) / denom;
    if (fit.kernel == Kernel::Normal) {
      m.sigma2.set_size(C);
      m.sigma2.head(K) = d.sigma2;
    }
    if (include_new_cluster) {
      Rng rng = make_rng(seed, {r});
      m.weights[K] = d.mass / denom;
      double s2 = 1.0;
      if (fit.kernel == Kernel::Normal) {
        s2 = stats::rinvgamma(rng, fit.prior.a, fit.prior.b);
        m.sigma2[K] = s2;
      }
      for (std::size_t h = 0; h < fit.p; ++h)
        m.beta(K, h) = d.base_mean[h] + stats::rnorm(rng) * std::sqrt(s2 / d.tau[h]);
    }
    out.push_back(std::move(m));
  }
  return out;
}

namespace {

using nlohmann::json;

json featurizer_json(const Featurizer& f) {
  json splines = json::array();
  for (const auto& s : f.splines)
    splines.push_back({{"column", s.column},
                       {"knots", s.basis.knots},
                       {"degree", s.basis.degree},
                       {"projection", jsonio::from_mat(s.projection)}});
  return {{"kind", design_kind_name(f.kind)}, {"splines", splines}};
}

Featurizer featurizer_from_json(const json& j, Role role, int t) {
  Featurizer f;
  f.kind = parse_design_kind(j.at("kind").get<std::string>());
  f.role = role;
  f.t = t;
  for (const auto& s : j.at("splines")) {
    SplineTerm term;
    term.column = s.at("column").get<std::size_t>();
    term.basis.knots = s.at("knots").get<std::vector<double>>();
    term.basis.degree = s.at("degree").get<int>();
    term.projection = jsonio::to_mat(s.at("projection"), term.basis.size());
    f.splines.push_back(std::move(term));
  }
  return f;
}

}  // namespace

json to_json(const FittedRegime& regime) {
  json cells = json::array();
  for (const auto& [key, c] : regime.cells) {
    json draws = json::array();
    for (const auto& d : c.draws) {
      json jd{{"weights", d.weights}, {"beta", jsonio::from_mat(d.beta)}};
      if (c.family == Family::Normal) jd["sigma2"] = jsonio::from_vec(d.sigma2);
      draws.push_back(std::move(jd));
    }
    cells.push_back({{"role", role_name(c.role)},
                     {"t", c.t},
                     {"arm", c.arm},
                     {"family", c.family == Family::Poisson ? "poisson" : "normal"},
                     {"features", featurizer_json(c.features)},
                     {"p", c.draws.empty() ? 0 : c.draws.front().beta.n_cols},
                     {"draws", draws}});
  }
  return {{"format", "medchain-regime-v1"},
          {"model", regime.model},
          {"T", regime.T},
          {"history", regime.history},
          {"scaling", to_json(regime.scaling)},
          {"n_draws", regime.n_draws},
          {"warnings", regime.warnings},
          {"cells", cells}};
}

FittedRegime regime_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "medchain-regime-v1")
      throw ValidationError("fit file: unsupported format tag '" + j.at("format").get<std::string>() + "'");
    FittedRegime r;
    r.model = j.at("model").get<std::string>();
    r.T = j.at("T").get<int>();
    r.history = j.at("history").get<std::vector<int>>();
    r.scaling = scaling_from_json(j.at("scaling"));
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& jc : j.at("cells")) {
      CellModel c;
      c.role = parse_role(jc.at("role").get<std::string>());
      c.t = jc.at("t").get<int>();
      c.arm = jc.at("arm").get<int>();
      c.family = jc.at("family").get<std::string>() == "poisson" ? Family::Poisson : Family::Normal;
      c.features = featurizer_from_json(jc.at("features"), c.role, c.t);
      const auto p = jc.at("p").get<arma::uword>();
      for (const auto& jd : jc.at("draws")) {
        MixtureDraw d;
        d.weights = jd.at("weights").get<std::vector<double>>();
        d.beta = jsonio::to_mat(jd.at("beta"), p);
        if (c.family == Family::Normal) d.sigma2 = jsonio::to_vec(jd.at("sigma2"));
        if (d.weights.size() != d.beta.n_rows) throw ValidationError("fit file: mixture weights/components mismatch");
        c.draws.push_back(std::move(d));
      }
      r.add(std::move(c));
    }
    const auto n = j.at("n_draws").get<std::size_t>();
    if (n != r.n_draws && !r.cells.empty()) throw ValidationError("fit file: draw count mismatch");
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("fit file: malformed JSON: ") + e.what());
  }
}

}  // namespace medchain
