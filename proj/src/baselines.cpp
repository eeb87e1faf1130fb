#include "medchain/baselines.hpp"

#include <cmath>
#include <limits>

#include "medchain/json_util.hpp"
#include "medchain/stats.hpp"

namespace medchain {

const char* baseline_name(BaselineKind k) {
  switch (k) {
    case BaselineKind::RegFull: return "reg1";
    case BaselineKind::RegOneStep: return "reg2";
    case BaselineKind::SplineAdditive: return "gam";
  }
  return "?";
}

BaselineKind parse_baseline(const std::string& s) {
  if (s == "reg1" || s == "reg-full") return BaselineKind::RegFull;
  if (s == "reg2" || s == "reg-onestep") return BaselineKind::RegOneStep;
  if (s == "gam" || s == "spline-additive") return BaselineKind::SplineAdditive;
  throw ValidationError("unknown baseline model '" + s + "'");
}

namespace {

std::vector<int> base_history(const std::vector<int>& h, int T) {
  if (h.empty()) return std::vector<int>(static_cast<std::size_t>(T), 0);
  if (static_cast<int>(h.size()) != T) throw ValidationError("baseline: base history must have length T");
  return h;
}

struct Fitted {
  arma::vec coef;
  arma::mat cov;
  double sigma2 = 1.0, df = 1.0, deviance = 0.0;
  std::vector<std::string> warnings;
};

Fitted fit_family(Family family, const arma::mat& X, const arma::vec& y, const arma::vec& offset,
                  const arma::vec& penalty) {
  Fitted f;
  if (family == Family::Normal) {
    auto lf = glm::fit_linear(X, y, penalty);
    f.coef = lf.coef;
    f.cov = lf.cov;
    f.sigma2 = lf.sigma2;
    f.df = lf.df_resid;
    const arma::vec r = y - X * lf.coef;
    f.deviance = arma::dot(r, r);
    f.warnings = lf.warnings;
  } else {
    auto pf = glm::fit_poisson(X, y, offset, penalty);
    f.coef = pf.coef;
    f.cov = pf.cov;
    f.deviance = pf.deviance;
    f.df = std::max(1.0, static_cast<double>(X.n_rows) - static_cast<double>(X.n_cols));
    f.warnings = pf.warnings;
  }
  return f;
}

double holdout_loss(Family family, const arma::mat& X, const arma::vec& y, const arma::vec& offset,
                    const arma::vec& coef) {
  const arma::vec eta = X * coef;
  if (family == Family::Normal) {
    const arma::vec r = y - eta;
    return arma::dot(r, r);
  }
  return glm::poisson_deviance(y, offset % arma::exp(arma::clamp(eta, -700.0, 700.0)));
}

std::vector<SplineTerm> build_splines(const arma::mat& X) {
  std::vector<SplineTerm> out;
  for (std::size_t j = 1; j < X.n_cols; ++j) {
    const arma::vec x = X.col(j);
    if (arma::vec(arma::unique(x)).n_elem < 7) continue;  // too few distinct values to smooth
    SplineTerm s;
    s.column = j;
    s.basis = glm::quintile_basis(x);
    const arma::mat B = s.basis.eval(x);
    arma::mat Z(x.n_elem, 2);
    Z.col(0).ones();
    Z.col(1) = x;
    s.projection = arma::solve(Z.t() * Z, Z.t() * B);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

CellFit fit_baseline(const Panel& panel, const Scaling& sc, BaselineKind kind, Role role, int t, int arm,
                     const BaselineOptions& opts) {
  const auto history = base_history(opts.history, panel.periods());
  std::vector<int> prefix(history.begin(), history.begin() + (t - 1));
  prefix.push_back(arm);
  const DesignKind dk = kind == BaselineKind::RegFull ? DesignKind::FullHistory : DesignKind::OneStep;
  NodeData d = node_data(panel, sc, dk, role, prefix);
  if (d.units.empty())
    throw ValidationError(std::string("baseline: empty arm subset for ") + role_name(role) + " at t " +
                          std::to_string(t) + ", arm " + std::to_string(arm));

  CellFit c;
  c.role = role;
  c.t = t;
  c.arm = arm;
  c.family = role_family(role, sc);
  c.features.kind = dk;
  c.features.role = role;
  c.features.t = t;
  c.n = d.units.size();

  arma::mat X = d.X;
  arma::vec penalty(X.n_cols, arma::fill::zeros);
  if (kind == BaselineKind::SplineAdditive) {
    c.features.splines = build_splines(d.X);
    X.set_size(d.X.n_rows, c.features.expand(d.X.row(0)).n_elem);
    for (std::size_t i = 0; i < d.X.n_rows; ++i) X.row(i) = c.features.expand(d.X.row(i));
    const std::size_t base_cols = d.X.n_cols;
    auto make_penalty = [&](double lambda) {
      arma::vec p(X.n_cols, arma::fill::zeros);
      if (X.n_cols > base_cols) p.tail(X.n_cols - base_cols).fill(lambda);
      return p;
    };
    double lambda = 0.0;
    if (opts.ridge_lambda) {
      lambda = *opts.ridge_lambda;
      if (!(lambda >= 0.0)) throw ValidationError("baseline: ridge penalty must be >= 0");
    } else {
      // 5-fold cross-validation over a fixed grid; ties keep the smoother fit.
      double best = std::numeric_limits<double>::infinity();
      for (double cand : {100.0, 10.0, 1.0, 0.1, 0.01}) {
        double loss = 0.0;
        bool ok = true;
        for (std::size_t fold = 0; fold < 5 && ok; ++fold) {
          std::vector<arma::uword> tr, te;
          for (std::size_t i = 0; i < X.n_rows; ++i) (i % 5 == fold ? te : tr).push_back(i);
          if (te.empty() || tr.size() < 2) continue;
          const arma::uvec itr(tr), ite(te);
          try {
            const auto f = fit_family(c.family, X.rows(itr), d.y.elem(itr), d.offset.elem(itr), make_penalty(cand));
            loss += holdout_loss(c.family, X.rows(ite), d.y.elem(ite), d.offset.elem(ite), f.coef);
          } catch (const NumericalError&) {
            ok = false;
          }
        }
        if (ok && loss < best) {
          best = loss;
          lambda = cand;
        }
      }
      if (!std::isfinite(best)) lambda = 100.0;
    }
    c.ridge_lambda = lambda;
    penalty = make_penalty(lambda);
  }
  const auto f = fit_family(c.family, X, d.y, d.offset, penalty);
  c.coef = f.coef;
  c.cov = f.cov;
  c.sigma2 = f.sigma2;
  c.df_resid = f.df;
  c.deviance = f.deviance;
  c.warnings = f.warnings;
  return c;
}

ParametricFit fit_baselines(const Panel& panel, BaselineKind kind, const BaselineOptions& opts) {
  auto report = validate_panel(panel, PanelRules{!opts.gaussian_outcome});
  if (!report.ok()) throw PanelValidationError(std::move(report));
  ParametricFit pf;
  pf.kind = kind;
  pf.T = panel.periods();
  pf.history = base_history(opts.history, pf.T);
  pf.scaling = Scaling::from_panel(panel, opts.gaussian_outcome);
  for (int t = 1; t <= pf.T; ++t)
    for (int arm = 0; arm <= 1; ++arm)
      for (Role role : {Role::Mediator, Role::Outcome, Role::Confounder}) {
        if (role == Role::Confounder && t == pf.T) continue;
        pf.cells.push_back(fit_baseline(panel, pf.scaling, kind, role, t, arm, opts));
      }
  return pf;
}

FittedRegime to_regime(const ParametricFit& fit, std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 1) throw ValidationError("baseline: need at least one parameter draw");
  FittedRegime r;
  r.model = baseline_name(fit.kind);
  r.T = fit.T;
  r.history = fit.history;
  r.scaling = fit.scaling;
  for (const auto& cf : fit.cells) {
    CellModel cm;
    cm.role = cf.role;
    cm.t = cf.t;
    cm.arm = cf.arm;
    cm.family = cf.family;
    cm.features = cf.features;
    Rng rng = make_rng(seed, {0xba5e, static_cast<std::uint64_t>(cf.role), static_cast<std::uint64_t>(cf.t),
                              static_cast<std::uint64_t>(cf.arm)});
    arma::mat L;
    if (!arma::chol(L, arma::symmatu(cf.cov), "lower")) {
      arma::vec ev;
      arma::mat V;
      arma::eig_sym(ev, V, arma::symmatu(cf.cov));
      L = V * arma::diagmat(arma::sqrt(arma::clamp(ev, 0.0, arma::datum::inf)));
    }
    for (std::size_t d = 0; d < n_draws; ++d) {
      MixtureDraw m;
      m.weights = {1.0};
      double scale = 1.0;
      if (cf.family == Family::Normal) {
        const double chi2 = stats::rgamma(rng, 0.5 * cf.df_resid, 0.5);
        const double s2 = cf.df_resid * cf.sigma2 / chi2;
        scale = std::sqrt(s2 / cf.sigma2);
        m.sigma2 = arma::vec{s2};
      }
      m.beta = stats::rmvnorm_chol(rng, arma::zeros(cf.coef.n_elem), L).t() * scale + cf.coef.t();
      cm.draws.push_back(std::move(m));
    }
    for (const auto& w : cf.warnings)
      r.warnings.push_back(std::string(role_name(cf.role)) + " t " + std::to_string(cf.t) + " arm " +
                           std::to_string(cf.arm) + ": " + w);
    r.add(std::move(cm));
  }
  return r;
}

EffectEstimate effects_parametric(const ParametricFit& fit, const Panel& panel, const Contrast& contrast,
                                  std::size_t n_mc, std::uint64_t seed, std::size_t n_draws, int threads) {
  const auto regime = to_regime(fit, n_draws, derive_seed(seed, {0x9a}));
  return effects(regime, panel, contrast, n_mc, seed, threads);
}

DpmChain bnp_static(const Panel& panel, SequentialOptions opts, std::uint64_t seed) {
  opts.dynamic = false;
  return sequential_fit(panel, opts, seed);
}

nlohmann::json to_json(const ParametricFit& fit) {
  auto cells = nlohmann::json::array();
  for (const auto& c : fit.cells)
    cells.push_back({{"role", role_name(c.role)},
                     {"t", c.t},
                     {"arm", c.arm},
                     {"n", c.n},
                     {"coef", jsonio::from_vec(c.coef)},
                     {"cov", jsonio::from_mat(c.cov)},
                     {"sigma2", c.sigma2},
                     {"ridge_lambda", c.ridge_lambda},
                     {"deviance", c.deviance},
                     {"warnings", c.warnings}});
  return {{"format", "medchain-parametric-v1"},
          {"kind", baseline_name(fit.kind)},
          {"T", fit.T},
          {"history", fit.history},
          {"scaling", to_json(fit.scaling)},
          {"cells", cells}};
}

}  // namespace medchain
