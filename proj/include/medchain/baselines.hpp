#ifndef MEDCHAIN_BASELINES_HPP
#define MEDCHAIN_BASELINES_HPP

#include <armadillo>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "medchain/conditional.hpp"
#include "medchain/dynamics.hpp"
#include "medchain/estimands.hpp"

namespace medchain {

enum class BaselineKind { RegFull, RegOneStep, SplineAdditive };
const char* baseline_name(BaselineKind k);
BaselineKind parse_baseline(const std::string& s);

struct BaselineOptions {
  std::vector<int> history;  // base treatment history; empty means all zeros
  bool gaussian_outcome = false;
  /// Fixed spline ridge penalty; chosen by 5-fold CV from {0.01, 0.1, 1, 10, 100} when unset.
  std::optional<double> ridge_lambda;
};

/// Normal linear (M, W) or Poisson log-linear (Y) fit of one (t, arm) cell.
struct CellFit {
  Role role = Role::Mediator;
  int t = 1;
  int arm = 0;
  Family family = Family::Normal;
  Featurizer features;
  arma::vec coef;
  arma::mat cov;
  double sigma2 = 1.0;    // residual variance (Normal)
  double df_resid = 1.0;
  double ridge_lambda = 0.0;
  double deviance = 0.0;  // residual sum of squares or Poisson deviance on the training rows
  std::size_t n = 0;
  std::vector<std::string> warnings;
};

struct ParametricFit {
  BaselineKind kind = BaselineKind::RegOneStep;
  int T = 0;
  std::vector<int> history;
  Scaling scaling;
  std::vector<CellFit> cells;
};

CellFit fit_baseline(const Panel& panel, const Scaling& sc, BaselineKind kind, Role role, int t, int arm,
                     const BaselineOptions& opts = {});

/// Every (role, t, arm) cell along the base history.
ParametricFit fit_baselines(const Panel& panel, BaselineKind kind, const BaselineOptions& opts = {});

/// Conditionals with normal-theory parameter draws: beta ~ N(coef, cov) and,
/// for Normal cells, sigma2 ~ df * s2 / chi2_df.
FittedRegime to_regime(const ParametricFit& fit, std::size_t n_draws, std::uint64_t seed);

EffectEstimate effects_parametric(const ParametricFit& fit, const Panel& panel, const Contrast& contrast,
                                  std::size_t n_mc, std::uint64_t seed, std::size_t n_draws = 200, int threads = 1);

/// Independent DPM fits per (t, arm) with the static prior.
DpmChain bnp_static(const Panel& panel, SequentialOptions opts, std::uint64_t seed);

nlohmann::json to_json(const ParametricFit& fit);

}  // namespace medchain

#endif
