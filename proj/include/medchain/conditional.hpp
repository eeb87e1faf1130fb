#ifndef MEDCHAIN_CONDITIONAL_HPP
#define MEDCHAIN_CONDITIONAL_HPP

#include <armadillo>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "medchain/design.hpp"
#include "medchain/dpm.hpp"
#include "medchain/glm.hpp"

namespace medchain {

/// Spline expansion of one predictor column: B-spline basis residualized
/// against {1, x} on the training data.
struct SplineTerm {
  std::size_t column = 0;
  glm::BSplineBasis basis;
  arma::mat projection;  // 2 x nb, coefficients of B on [1, x]
};

/// Maps a trajectory to the model-scale predictor row of one cell.
struct Featurizer {
  DesignKind kind = DesignKind::OneStep;
  Role role = Role::Mediator;
  int t = 1;
  std::vector<SplineTerm> splines;

  arma::rowvec row(const Trajectory& tr, const Scaling& sc) const;
  /// Applies the spline expansion to an already-built base row.
  arma::rowvec expand(const arma::rowvec& base) const;
};

/// A finite mixture of regression components for one posterior draw.
struct MixtureDraw {
  std::vector<double> weights;
  arma::mat beta;    // components x p
  arma::vec sigma2;  // Normal family only
};

/// Fitted conditional law of one (role, t, arm) cell, as a set of posterior
/// draws of finite mixtures.
struct CellModel {
  Role role = Role::Mediator;
  int t = 1;
  int arm = 0;
  Family family = Family::Normal;
  Featurizer features;
  std::vector<MixtureDraw> draws;

  /// Draws the response on the data scale.
  double sample(Rng& rng, std::size_t r, const arma::rowvec& x, double offset, const Scaling& sc) const;
  /// Component means on the data scale (Poisson: mean count at `offset`).
  void component_means(std::size_t r, const arma::rowvec& x, double offset, const Scaling& sc,
                       std::vector<double>& out) const;
  /// Mixture mean on the data scale.
  double mean(std::size_t r, const arma::rowvec& x, double offset, const Scaling& sc) const;
};

using CellKey = std::tuple<int, int, int>;  // role, t, arm

/// Fitted conditionals for the nodes along one base treatment history:
/// node (t, z) is the set of units following history[0..t-2] then z.
struct FittedRegime {
  std::string model;  // reg1, reg2, gam, bnp, bnpbdm, ...
  int T = 0;
  std::vector<int> history;
  Scaling scaling;
  std::size_t n_draws = 0;
  std::map<CellKey, CellModel> cells;
  std::vector<std::string> warnings;

  const CellModel& cell(Role role, int t, int arm) const;
  bool has(Role role, int t, int arm) const;
  void add(CellModel cell);
};

/// Converts a DPM fit to mixture draws over the occupied clusters, weighted
/// n_k / n. With `include_new_cluster` the CRP predictive is used instead:
/// weights n_k / (n + mass) plus one component drawn from the base measure
/// with weight mass / (n + mass). Off by default because a base-measure
/// draw on a log link gives the mixture mean unbounded tails.
std::vector<MixtureDraw> mixture_draws(const DpmFit& fit, std::uint64_t seed, bool include_new_cluster = false);

nlohmann::json to_json(const FittedRegime& regime);
FittedRegime regime_from_json(const nlohmann::json& j);

}  // namespace medchain

#endif
