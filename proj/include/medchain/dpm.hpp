#ifndef MEDCHAIN_DPM_HPP
#define MEDCHAIN_DPM_HPP

#include <armadillo>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "medchain/common.hpp"

namespace medchain {

struct McmcConfig {
  int iterations = 15000;
  int burn_in = 5000;
  int thin = 10;

  static McmcConfig paper() { return {15000, 5000, 10}; }
  static McmcConfig desk() { return {2000, 500, 5}; }
  static McmcConfig named(const std::string& profile);
  int retained() const { return (iterations - burn_in) / thin; }
  void validate() const;
};

/// Dirichlet-process prior for one regression cell.
///
/// Normal kernel: cluster parameters (beta, s2) ~ N(A, s2 * T^-1) x IG(a, b)
/// with T = diag(tau). Poisson kernel: beta ~ N(A, T^-1).
/// tau_h ~ Gamma(tau_shape, tau_rate), mass ~ Gamma(mass_shape, mass_rate),
/// A ~ N(base_mean, base_cov).
struct DpPrior {
  double mass_shape = 1.0, mass_rate = 1.0;
  double tau_shape = 2.0, tau_rate = 1.0;
  double a = 5.0, b = 1.0;
  arma::vec base_mean;
  arma::mat base_cov;

  // Held fixed instead of sampled when set.
  std::optional<double> fixed_mass;
  std::optional<arma::vec> fixed_tau;
  bool fixed_base = false;  // A stays at base_mean

  /// Static default: A ~ N(center, 10 I).
  static DpPrior centered(const arma::vec& center, double variance = 10.0);
  void validate(std::size_t p) const;
};

enum class Kernel { Normal, Poisson };
const char* kernel_name(Kernel k);
Kernel parse_kernel(const std::string& s);

struct DpmDraw {
  std::vector<int> labels;  // cluster index per observation, 0..K-1
  arma::mat beta;           // K x p
  arma::vec sigma2;         // K (normal kernel; empty for Poisson)
  double mass = 1.0;
  arma::vec base_mean;      // A
  arma::vec tau;

  std::size_t clusters() const { return beta.n_rows; }
  std::vector<std::size_t> counts() const;
};

struct DpmFit {
  Kernel kernel = Kernel::Normal;
  std::size_t n = 0;
  std::size_t p = 0;
  McmcConfig mcmc;
  DpPrior prior;
  std::vector<DpmDraw> draws;
  double acceptance_rate = 0.0;  // Poisson: post-burn-in Metropolis acceptance
  double proposal_scale = 1.0;
  std::vector<std::string> warnings;

  /// Posterior mean of a functional of the base-measure mean over draws.
  arma::mat base_mean_draws() const;  // retained x p
};

DpmFit fit_normal_dpm(const arma::vec& y, const arma::mat& X, const DpPrior& prior, const McmcConfig& mcmc,
                      std::uint64_t seed);

DpmFit fit_poisson_dpm(const arma::vec& y, const arma::vec& offset, const arma::mat& X, const DpPrior& prior,
                       const McmcConfig& mcmc, std::uint64_t seed);

/// Posterior predictive draws: one response per (retained draw, new row).
/// Membership follows the CRP predictive, with a new-cluster term drawn
/// from the base measure. `offset` is required for the Poisson kernel.
arma::mat posterior_predictive(const DpmFit& fit, const arma::mat& Xnew, const arma::vec& offset, std::uint64_t seed);

/// Per-draw analytic predictive mean at each new row (Poisson kernel: mean
/// count including the offset).
arma::mat predictive_mean(const DpmFit& fit, const arma::mat& Xnew, const arma::vec& offset);

nlohmann::json to_json(const DpmFit& fit);
DpmFit dpm_fit_from_json(const nlohmann::json& j);

}  // namespace medchain

#endif
