#ifndef MEDCHAIN_DYNAMICS_HPP
#define MEDCHAIN_DYNAMICS_HPP

#include <armadillo>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "medchain/conditional.hpp"
#include "medchain/design.hpp"
#include "medchain/dpm.hpp"
#include "medchain/panel.hpp"

namespace medchain {

/// Monte Carlo summary of the base-measure means at one (t, arm) node. Each
/// row of theta stacks the mediator, outcome and (t < T) confounder blocks.
struct StateSummary {
  int t = 1;
  int arm = 0;
  arma::mat theta;                 // n_t x dim
  arma::mat sigma;                 // evolution covariance used to reach this state (empty at t = 1)
  std::vector<std::size_t> blocks; // widths of the stacked role blocks
  std::vector<std::string> warnings;

  std::size_t n() const { return theta.n_rows; }
  std::size_t dim() const { return theta.n_cols; }
  /// Columns of block b.
  arma::mat block(std::size_t b) const;
};

nlohmann::json to_json(const StateSummary& s);
StateSummary state_from_json(const nlohmann::json& j);

/// theta_i + MVN(0, sigma) for every row; n_t is preserved. A sigma that is
/// not positive semidefinite is repaired by clipping eigenvalues at 0.
StateSummary evolve(const StateSummary& prev, const arma::mat& sigma, std::uint64_t seed);

/// Block-diagonal covariance of the theta rows within each block.
arma::mat posterior_block_cov(const StateSummary& s);

struct MvnParams {
  arma::vec mean;
  arma::mat cov;
  std::vector<std::string> warnings;
};

/// Moment-matched MVN with cov + eps I, eps = 1e-8 * trace / dim (1e-8 for
/// a degenerate sample). Requires n_t >= dim + 1.
MvnParams fit_base_mvn(const StateSummary& s);

struct SequentialOptions {
  std::vector<int> history;  // base treatment history; empty means all zeros
  McmcConfig mcmc = McmcConfig::desk();
  bool dynamic = true;
  double static_prior_variance = 10.0;
  DesignKind kind = DesignKind::OneStep;
  std::string checkpoint_dir;  // empty: no checkpoints
  bool gaussian_outcome = false;  // Normal-kernel outcome (linear-Gaussian analyses)
  int threads = 1;
  DpPrior hyper;  // hyperparameters other than the base mean are taken from here
};

struct NodeFit {
  int t = 1;
  int arm = 0;
  std::size_t units = 0;
  DpmFit mediator, outcome;
  std::optional<DpmFit> confounder;
  StateSummary state;
};

struct DpmChain {
  int T = 0;
  bool dynamic = true;
  DesignKind kind = DesignKind::OneStep;
  std::vector<int> history;
  Scaling scaling;
  std::map<std::pair<int, int>, NodeFit> nodes;  // (t, arm)
  std::vector<std::string> warnings;

  const NodeFit& node(int t, int arm) const;
};

/// Seed of the DPM fit for (t, arm, role) within sequential_fit.
std::uint64_t node_seed(std::uint64_t seed, int t, int arm, Role role);

/// Static prior: A ~ N(least-squares / IRWLS estimate, variance * I).
DpPrior static_prior(const NodeData& data, Family family, double variance, const DpPrior& hyper);

/// Fits one node. With `prev` (the same arm's state at t-1) the base-mean
/// priors come from the MVN approximation to the evolved state.
NodeFit fit_node(const Panel& panel, const Scaling& sc, const SequentialOptions& opts, int t, int arm,
                 const StateSummary* prev, std::uint64_t seed);

DpmChain sequential_fit(const Panel& panel, const SequentialOptions& opts, std::uint64_t seed);

/// Conditional models for the g-formula; new-cluster components are drawn
/// with streams derived from `seed`.
FittedRegime to_regime(const DpmChain& chain, const std::string& model, std::uint64_t seed);

}  // namespace medchain

#endif
