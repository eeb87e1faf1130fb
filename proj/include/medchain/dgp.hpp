#ifndef MEDCHAIN_DGP_HPP
#define MEDCHAIN_DGP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "medchain/contrast.hpp"
#include "medchain/panel.hpp"

namespace medchain {

/// Attenuation schedule for the one-time-preceding coefficients.
/// Case1: -15% per step; Case2: -30% per step; Case3: -30%, +15%, -20%.
enum class Schedule { Case1, Case2, Case3 };

Schedule parse_schedule(const std::string& label);
std::string schedule_label(Schedule s);

/// Cumulative multiplier f(t) of the schedule (f(1) = 1).
double schedule_factor(Schedule s, int t);

/// Per-time lead coefficients: out[t-1][j] = base[j] * f(t), t = 1..periods.
std::vector<std::vector<double>> attenuate(const std::vector<double>& base, Schedule s, int periods);

/// Coefficient of the instance `lag` steps before the lead in the model for
/// time t: base * f(t - lag) / 10^lag. Zero when t - lag < 1.
double lagged_coefficient(double base, Schedule s, int t, int lag);

/// Synthetic data-generating process. All linear predictors use centred
/// variables, so intercepts are on the response scale (log rate for Y).
struct DgpConfig {
  std::size_t n = 1573;
  int T = 4;
  Schedule schedule = Schedule::Case1;
  std::uint64_t seed = 1;
  double xi = 1.0;   // mediator skew-normal scale
  double psi = 2.0;  // mediator skew-normal shape
  double c = 0.1;    // log(Y + c)
  /// false: Y ~ Poisson(offset * exp(eta)); true: Y = eta + N(0, outcome_sd^2)
  /// (linear-Gaussian reduction, offsets ignored).
  bool identity_outcome = false;
  double outcome_sd = 1.0;

  struct Centres {
    double x = 27.0, m = 15.0, log_y = 2.302585092994046;
    std::vector<double> v{0.5, 0.24};
  } centres;

  struct Baseline {
    double x0_mean = 27.0, x0_sd = 1.5;
    double m0_mean = 15.0, m0_sd = 2.0;
    double offset_log_mean = 6.396929655216146, offset_log_sd = 0.9, offset_jitter_sd = 0.05;
    double urban_a = 0.7, urban_b = 0.7;
    double elevation_shape = 2.0, elevation_rate = 8.333333333333334;
  } baseline;

  struct Confounder {
    double intercept_a = 26.25, intercept_b = 27.75;
    double m = 0.05, z = -0.4, x = 0.6;
    std::vector<double> v{0.8, -3.0};
    double variance = 0.5;
  } confounder;

  struct Mediator {
    double intercept = 15.0;
    double m = 0.6, z = -1.2, x = 0.25;
    std::vector<double> v{1.0, -1.5};
  } mediator;

  struct Outcome {
    double intercept = -4.074541934925921;  // log(0.017)
    double m = 0.05, z = -0.03, log_y = 0.15, x = 0.02;
    double mz = -0.02, mx = 0.01;
    std::vector<double> v{0.1, -0.1};
  } outcome;

  struct Treatment {
    std::vector<double> intercepts{-0.4, -0.1, 0.2, 0.5};  // last value reused past its length
    double z = 0.8, x = 0.2;
    std::vector<double> v{-0.5, 0.8};
  } treatment;

  std::vector<std::string> covariate_names{"urban", "elevation"};

  void validate() const;
};

DgpConfig dgp_config_from_json(const nlohmann::json& j, DgpConfig base = {});
nlohmann::json to_json(const DgpConfig& cfg);
DgpConfig load_dgp_config(const std::string& path);

/// Draws a panel from the DGP with cfg.seed. Throws NumericalError naming
/// (unit, t) if a Poisson mean overflows.
Panel simulate_panel(const DgpConfig& cfg);

/// Mean and variance of the confounder mixture at time t (t >= 2 uses the
/// mixture display; t = 1 uses the same form with baseline lags) given the
/// unit's simulated history in `panel`.
struct MixtureMoments {
  double mean = 0.0;
  double variance = 0.0;
};
MixtureMoments confounder_moments(const DgpConfig& cfg, const Panel& panel, std::size_t unit, int t);

/// Ground truth for one contrast by forward simulation of the DGP with
/// treatments forced; values on the 200 * Y / offset rate scale (raw mean
/// for the identity outcome).
struct TruthOracle {
  int t = 0;
  std::size_t n_mc = 0;
  double mean_a = 0.0, mean_b = 0.0, mean_c = 0.0;  // E[Y_{z,M_z}], E[Y_{z,M_z'}], E[Y_{z',M_z'}]
  double nde = 0.0, nie = 0.0, te = 0.0;
  double se_nde = 0.0, se_nie = 0.0, se_te = 0.0;
  std::vector<std::string> warnings;
};

TruthOracle true_effects(const DgpConfig& cfg, const Contrast& contrast, std::size_t n_mc, std::uint64_t seed,
                         int threads = 1);

}  // namespace medchain

#endif
