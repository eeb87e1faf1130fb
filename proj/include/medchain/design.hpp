#ifndef MEDCHAIN_DESIGN_HPP
#define MEDCHAIN_DESIGN_HPP

#include <armadillo>
#include <string>
#include <vector>

#include "json.hpp"
#include "medchain/panel.hpp"

namespace medchain {

/// The three observation models fitted at every (t, arm) node. The
/// confounder model at t predicts W(t+1) and exists only for t < T.
enum class Role { Mediator = 0, Outcome = 1, Confounder = 2 };
const char* role_name(Role r);
Role parse_role(const std::string& s);

enum class Family { Normal, Poisson };

/// Panel-wide standardization of M, W, the lagged-outcome transform and V.
/// The lagged-outcome transform is log(Y + c) for counts and Y itself for a
/// Gaussian outcome.
struct Scaling {
  bool gaussian_outcome = false;
  double c = 0.1;
  double m_mean = 0.0, m_sd = 1.0;
  double w_mean = 0.0, w_sd = 1.0;
  double ly_mean = 0.0, ly_sd = 1.0;
  std::vector<double> v_mean, v_sd;

  static Scaling from_panel(const Panel& panel, bool gaussian_outcome, double c = 0.1);

  double lag_y(double y) const { return gaussian_outcome ? y : std::log(y + c); }
  double sm(double m) const { return (m - m_mean) / m_sd; }
  double sw(double w) const { return (w - w_mean) / w_sd; }
  double sly(double y) const { return (lag_y(y) - ly_mean) / ly_sd; }
  double sv(std::size_t j, double v) const { return (v - v_mean[j]) / v_sd[j]; }
};

nlohmann::json to_json(const Scaling& s);
Scaling scaling_from_json(const nlohmann::json& j);

/// One unit's trajectory; index 0 of m, w, y is the baseline. `w` may hold
/// one extra entry (W(T+1)) during forward simulation. offset[0] is unused.
struct Trajectory {
  std::vector<double> m, w, y, offset;
  std::vector<double> v;
};

Trajectory trajectory_of(const Panel& panel, std::size_t unit);

/// OneStep: immediately preceding predictors. FullHistory: every earlier
/// instance. InterceptOnly: deliberately underspecified comparator.
enum class DesignKind { OneStep, FullHistory, InterceptOnly };
const char* design_kind_name(DesignKind k);
DesignKind parse_design_kind(const std::string& s);

/// Predictor row (first column is the intercept).
///   mediator   M(t):   1, M(t-1), W(t), V
///   outcome    Y(t):   1, M(t), W(t), lag-transform of Y(t-1), V
///   confounder W(t+1): 1, M(t), W(t), V
arma::rowvec design_row(DesignKind kind, Role role, int t, const Trajectory& tr, const Scaling& sc);
std::vector<std::string> design_names(DesignKind kind, Role role, int t, const std::vector<std::string>& covariates);

/// Model-scale response: standardized M(t) / W(t+1), the raw count Y(t), or
/// the standardized Y(t) for a Gaussian outcome.
double model_response(Role role, int t, const Trajectory& tr, const Scaling& sc);
/// Back to data scale.
double data_response(Role role, double value, const Scaling& sc);

Family role_family(Role role, const Scaling& sc);

struct NodeData {
  arma::vec y;
  arma::mat X;
  arma::vec offset;  // ones unless Poisson outcome
  std::vector<std::size_t> units;
};

/// Rows of the units whose observed treatment history matches `prefix`
/// (length t: the history before t plus the arm at t).
NodeData node_data(const Panel& panel, const Scaling& sc, DesignKind kind, Role role,
                   const std::vector<int>& prefix);

}  // namespace medchain

#endif
