#ifndef MEDCHAIN_ESTIMANDS_HPP
#define MEDCHAIN_ESTIMANDS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "medchain/assumptions.hpp"
#include "medchain/conditional.hpp"
#include "medchain/contrast.hpp"
#include "medchain/panel.hpp"

namespace medchain {

struct Summary {
  double mean = 0.0, median = 0.0, lo95 = 0.0, hi95 = 0.0, sd = 0.0;
};
Summary summarize(const std::vector<double>& draws);

/// Posterior draws of the three counterfactual means at time t and the
/// derived effects. Rates are per 200 person-years for a count outcome.
struct EffectEstimate {
  std::string model;
  Contrast contrast;
  std::size_t n_mc = 0;
  std::vector<double> mean_a;  // E[Y_{z, M_z}]
  std::vector<double> mean_b;  // E[Y_{z, M_z'}]
  std::vector<double> mean_c;  // E[Y_{z', M_z'}]
  std::vector<double> nde, nie, te;
  /// Monte Carlo standard error of each counterfactual-mean draw, averaged
  /// over draws.
  double mc_se_a = 0.0, mc_se_b = 0.0, mc_se_c = 0.0;
  std::vector<std::string> warnings;
  std::optional<AssumptionLedger> ledger;

  Summary nde_summary() const { return summarize(nde); }
  Summary nie_summary() const { return summarize(nie); }
  Summary te_summary() const { return summarize(te); }
};

struct SensitivitySpec {
  double chi = 1.0;
  double kappa = 0.5;
  void validate() const;
};

/// Posterior draws of E[Y_{outcome_history, M_{mediator_history}(t)}(t)].
/// The histories must agree before t. With mediator_history equal to
/// outcome_history this reproduces the E[Y_{z, M_z}] draws of effects()
/// under the same seed.
std::vector<double> counterfactual_mean(const FittedRegime& regime, const Panel& panel,
                                        const std::vector<int>& outcome_history,
                                        const std::vector<int>& mediator_history, std::size_t n_mc,
                                        std::uint64_t seed, int threads = 1);

EffectEstimate effects(const FittedRegime& regime, const Panel& panel, const Contrast& contrast, std::size_t n_mc,
                       std::uint64_t seed, int threads = 1);

/// Per-path record of one posterior draw of the tilted computation.
struct TiltTrace {
  double threshold = 0.0;
  double median_rate = 0.0;
  std::vector<double> d;               // M_z'(t) - M_z(t)
  std::vector<double> offset;          // offset(t) of the path
  std::vector<std::vector<double>> component_weights;  // outcome mixture for Y_{z, M_z'}
  std::vector<std::vector<double>> component_means;   // Poisson means (counts)
  std::vector<double> b_untilted;      // rate scale
  std::vector<double> b_tilted;        // rate scale
  std::vector<double> weights;         // tilt weights of a drawn outcome (ESS diagnostic)
};

/// Exponentially tilted a-priori counterfactual. `trace`, when given,
/// receives the per-path record of posterior draw `trace_draw`.
EffectEstimate tilted_effects(const FittedRegime& regime, const Panel& panel, const Contrast& contrast,
                              const SensitivitySpec& spec, std::size_t n_mc, std::uint64_t seed, int threads = 1,
                              TiltTrace* trace = nullptr, std::size_t trace_draw = 0);

/// Tilted mean count of a Poisson mixture: E[Y w(Y)] / E[w(Y)] with
/// w(y) = chi^{sgn(y - cut) * sgn_d}.
double tilted_poisson_mixture_mean(const std::vector<double>& weights, const std::vector<double>& means, double cut,
                                   double chi, int sgn_d);

}  // namespace medchain

#endif
