#include <cmath>

#include "doctest.h"
#include "medchain/baselines.hpp"
#include "medchain/dgp.hpp"
#include "medchain/serialize.hpp"
#include "medchain/stats.hpp"

using namespace medchain;

namespace {

Panel default_panel(std::size_t n, int T, std::uint64_t seed) {
  DgpConfig c;
  c.n = n;
  c.T = T;
  c.seed = seed;
  return simulate_panel(c);
}

arma::vec predictions(const CellFit& f, const arma::mat& base) {
  arma::vec out(base.n_rows);
  for (arma::uword i = 0; i < base.n_rows; ++i) out(i) = arma::dot(f.features.expand(base.row(i)), f.coef);
  return out;
}

}  // namespace

TEST_CASE("kind names parse both spellings") {
  CHECK(parse_baseline("reg1") == BaselineKind::RegFull);
  CHECK(parse_baseline("reg-onestep") == BaselineKind::RegOneStep);
  CHECK(parse_baseline("gam") == BaselineKind::SplineAdditive);
  CHECK(std::string(baseline_name(BaselineKind::SplineAdditive)) == "gam");
  CHECK_THROWS_AS(parse_baseline("lasso"), ValidationError);
}

TEST_CASE("one-step regression recovers the generating mediator coefficients") {
  DgpConfig c;
  c.n = 3000;
  c.T = 1;
  c.seed = 41;
  const Panel p = simulate_panel(c);
  const Scaling sc = Scaling::from_panel(p, false);
  for (int arm = 0; arm <= 1; ++arm) {
    const CellFit f = fit_baseline(p, sc, BaselineKind::RegOneStep, Role::Mediator, 1, arm);
    REQUIRE(f.coef.n_elem == 5);
    // the model-scale slopes implied by the generator
    const arma::vec truth{c.mediator.m, c.mediator.x * sc.w_sd / sc.m_sd, c.mediator.v[0] * sc.v_sd[0] / sc.m_sd,
                          c.mediator.v[1] * sc.v_sd[1] / sc.m_sd};
    for (arma::uword j = 0; j < 4; ++j)
      CHECK(std::abs(f.coef(j + 1) - truth(j)) <= 3.0 * std::sqrt(f.cov(j + 1, j + 1)));
    CHECK(f.cov.is_symmetric(1e-12));
    arma::vec eval;
    arma::eig_sym(eval, f.cov);
    CHECK(eval.min() >= -1e-12);
  }
}

TEST_CASE("spline-additive on linear data stays within 2 SEs of the linear fit") {
  DgpConfig c;
  c.n = 2000;
  c.T = 1;
  c.seed = 42;
  c.psi = 0.0;  // symmetric noise, exactly linear mean
  const Panel p = simulate_panel(c);
  const Scaling sc = Scaling::from_panel(p, false);
  const CellFit lin = fit_baseline(p, sc, BaselineKind::RegOneStep, Role::Mediator, 1, 0);
  const CellFit spl = fit_baseline(p, sc, BaselineKind::SplineAdditive, Role::Mediator, 1, 0);
  CHECK(!spl.features.splines.empty());
  const NodeData d = node_data(p, sc, DesignKind::OneStep, Role::Mediator, {0});
  const arma::vec pl = predictions(lin, d.X), ps = predictions(spl, d.X);
  std::size_t outside = 0;
  for (arma::uword i = 0; i < d.X.n_rows; ++i) {
    // pointwise SE of the fitted spline curve
    const arma::rowvec xs = spl.features.expand(d.X.row(i));
    const double se = std::sqrt(arma::as_scalar(xs * spl.cov * xs.t()));
    outside += std::abs(ps(i) - pl(i)) > 2.0 * se;
  }
  CHECK(outside == 0);
}

TEST_CASE("spline deviance increases with the penalty toward the linear fit") {
  DgpConfig c;
  c.n = 1000;
  c.T = 1;
  c.seed = 43;
  const Panel p = simulate_panel(c);
  const Scaling sc = Scaling::from_panel(p, false);
  const CellFit lin = fit_baseline(p, sc, BaselineKind::RegOneStep, Role::Mediator, 1, 1);
  for (Role role : {Role::Mediator, Role::Outcome}) {
    double prev = -1.0;
    for (double lambda : {0.01, 0.1, 1.0, 10.0, 100.0, 1e10}) {
      BaselineOptions o;
      o.ridge_lambda = lambda;
      const CellFit f = fit_baseline(p, sc, BaselineKind::SplineAdditive, role, 1, 1, o);
      CHECK(f.ridge_lambda == lambda);
      CHECK(f.deviance >= prev - 1e-9 * std::abs(prev));
      prev = f.deviance;
    }
    if (role == Role::Mediator) CHECK(prev == doctest::Approx(lin.deviance).epsilon(1e-6));
  }
}

TEST_CASE("cross-validated penalty comes from the grid") {
  const Panel p = default_panel(600, 2, 44);
  const ParametricFit fit = fit_baselines(p, BaselineKind::SplineAdditive);
  for (const auto& cell : fit.cells) {
    bool on_grid = false;
    for (double g : {0.01, 0.1, 1.0, 10.0, 100.0}) on_grid = on_grid || cell.ridge_lambda == g;
    CHECK((on_grid || cell.features.splines.empty()));
  }
}

TEST_CASE("full-history and one-step regressions coincide at T = 1") {
  const Panel p = default_panel(800, 1, 45);
  const ParametricFit a = fit_baselines(p, BaselineKind::RegFull);
  const ParametricFit b = fit_baselines(p, BaselineKind::RegOneStep);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].coef.n_elem == b.cells[i].coef.n_elem);
    CHECK(arma::approx_equal(a.cells[i].coef, b.cells[i].coef, "absdiff", 1e-12));
  }
}

TEST_CASE("full history grows the design with t") {
  const Panel p = default_panel(800, 3, 46);
  const Scaling sc = Scaling::from_panel(p, false);
  const CellFit one = fit_baseline(p, sc, BaselineKind::RegOneStep, Role::Outcome, 3, 0);
  const CellFit full = fit_baseline(p, sc, BaselineKind::RegFull, Role::Outcome, 3, 0);
  CHECK(full.coef.n_elem > one.coef.n_elem);
  CHECK(full.family == Family::Poisson);
}

TEST_CASE("singular design falls back to ridge with a warning") {
  Panel p = default_panel(300, 1, 47);
  for (std::size_t u = 0; u < p.units(); ++u) p.v(u, 0) = 0.3;
  const Scaling sc = Scaling::from_panel(p, false);
  const CellFit f = fit_baseline(p, sc, BaselineKind::RegOneStep, Role::Mediator, 1, 0);
  CHECK(!f.warnings.empty());
  CHECK(f.coef.is_finite());
  const CellFit g = fit_baseline(p, sc, BaselineKind::RegOneStep, Role::Outcome, 1, 0);
  CHECK(!g.warnings.empty());
  CHECK(g.coef.is_finite());
}

TEST_CASE("empty arm is a validation error") {
  Panel p = default_panel(100, 1, 48);
  for (std::size_t u = 0; u < p.units(); ++u) p.z(u, 1) = 0;
  CHECK_THROWS_AS(fit_baselines(p, BaselineKind::RegOneStep), ValidationError);
}

TEST_CASE("parametric effects: additivity and identical output schema across estimators") {
  const Panel p = default_panel(400, 2, 49);
  std::vector<nlohmann::json> shapes;
  for (auto kind : {BaselineKind::RegFull, BaselineKind::RegOneStep, BaselineKind::SplineAdditive}) {
    const ParametricFit fit = fit_baselines(p, kind);
    const EffectEstimate e = effects_parametric(fit, p, Contrast::final_switch(2), 1000, 2, 40);
    for (std::size_t r = 0; r < e.te.size(); ++r) CHECK(e.te[r] == e.nde[r] + e.nie[r]);
    auto j = to_json(e, false);
    shapes.push_back(j);
  }
  SequentialOptions o;
  o.mcmc = {300, 100, 5};
  const DpmChain chain = bnp_static(p, o, 3);
  CHECK(!chain.dynamic);
  const EffectEstimate e = effects(to_regime(chain, "bnp", 3), p, Contrast::final_switch(2), 1000, 2);
  shapes.push_back(to_json(e, false));
  for (const auto& j : shapes) {
    CHECK(j.size() == shapes.front().size());
    for (const auto& [key, value] : shapes.front().items()) CHECK(j.contains(key));
  }
}

TEST_CASE("static BNP at T = 1 matches the sequential fit") {
  const Panel p = default_panel(300, 1, 50);
  SequentialOptions o;
  o.mcmc = {300, 100, 1};
  const DpmChain a = bnp_static(p, o, 7);
  const DpmChain b = sequential_fit(p, o, 7);
  for (int arm = 0; arm <= 1; ++arm) {
    CHECK(to_json(a.node(1, arm).outcome) == to_json(b.node(1, arm).outcome));
    CHECK(to_json(a.node(1, arm).mediator) == to_json(b.node(1, arm).mediator));
  }
}

TEST_CASE("zero-effect generator: intervals cover zero in at least 90% of 50 replications") {
  const int reps = 50;
  int cover_nde = 0, cover_nie = 0, cover_te = 0;
  for (int r = 0; r < reps; ++r) {
    DgpConfig c;
    c.n = 500;
    c.T = 2;
    c.seed = 5000 + static_cast<std::uint64_t>(r);
    c.mediator.z = 0.0;
    c.outcome.z = c.outcome.mz = 0.0;
    const Panel p = simulate_panel(c);
    const ParametricFit fit = fit_baselines(p, BaselineKind::RegOneStep);
    const EffectEstimate e = effects_parametric(fit, p, Contrast::final_switch(2), 1000, r, 100);
    const auto covers = [](const Summary& s) { return s.lo95 <= 0.0 && 0.0 <= s.hi95; };
    cover_nde += covers(e.nde_summary());
    cover_nie += covers(e.nie_summary());
    cover_te += covers(e.te_summary());
  }
  MESSAGE("coverage NDE " << cover_nde << ", NIE " << cover_nie << ", TE " << cover_te << " of " << reps);
  CHECK(cover_nde >= 45);
  CHECK(cover_nie >= 45);
  CHECK(cover_te >= 45);
}

TEST_CASE("parametric fit JSON carries every cell") {
  const Panel p = default_panel(300, 2, 51);
  const ParametricFit fit = fit_baselines(p, BaselineKind::SplineAdditive);
  const auto j = to_json(fit);
  CHECK(j.at("cells").size() == fit.cells.size());
  // mediator + outcome per (t, arm), confounder for t < T
  CHECK(fit.cells.size() == 2 * 2 + 2 * 2 + 2);
}
