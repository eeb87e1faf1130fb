#include "medchain/design.hpp"

#include <cmath>

#include "medchain/common.hpp"
#include "medchain/stats.hpp"

namespace medchain {

const char* role_name(Role r) {
  switch (r) {
    case Role::Mediator: return "mediator";
    case Role::Outcome: return "outcome";
    case Role::Confounder: return "confounder";
  }
  return "?";
}

Role parse_role(const std::string& s) {
  if (s == "mediator") return Role::Mediator;
  if (s == "outcome") return Role::Outcome;
  if (s == "confounder") return Role::Confounder;
  throw ValidationError("unknown model role '" + s + "'");
}

namespace {

void moments(const std::vector<double>& x, double& mean, double& sd) {
  mean = stats::mean(x);
  sd = stats::sd(x);
  if (!(sd > 1e-12) || !std::isfinite(sd)) {
    // constant column: centre exactly so it standardizes to a true zero
    sd = 1.0;
    if (!x.empty()) mean = x.front();
  }
}

}  // namespace

Scaling Scaling::from_panel(const Panel& panel, bool gaussian_outcome, double c) {
  Scaling s;
  s.gaussian_outcome = gaussian_outcome;
  s.c = c;
  std::vector<double> m, w, ly;
  for (std::size_t u = 0; u < panel.units(); ++u)
    for (int t = 0; t <= panel.periods(); ++t) {
      m.push_back(panel.m(u, t));
      w.push_back(panel.w(u, t));
      ly.push_back(s.lag_y(panel.y(u, t)));
    }
  moments(m, s.m_mean, s.m_sd);
  moments(w, s.w_mean, s.w_sd);
  moments(ly, s.ly_mean, s.ly_sd);
  for (std::size_t j = 0; j < panel.covariates(); ++j) {
    std::vector<double> v;
    for (std::size_t u = 0; u < panel.units(); ++u) v.push_back(panel.v(u)[j]);
    double mu = 0.0, sd = 1.0;
    moments(v, mu, sd);
    s.v_mean.push_back(mu);
    s.v_sd.push_back(sd);
  }
  return s;
}

nlohmann::json to_json(const Scaling& s) {
  return {{"gaussian_outcome", s.gaussian_outcome},
          {"c", s.c},
          {"m", {s.m_mean, s.m_sd}},
          {"w", {s.w_mean, s.w_sd}},
          {"ly", {s.ly_mean, s.ly_sd}},
          {"v_mean", s.v_mean},
          {"v_sd", s.v_sd}};
}

Scaling scaling_from_json(const nlohmann::json& j) {
  Scaling s;
  s.gaussian_outcome = j.at("gaussian_outcome").get<bool>();
  s.c = j.at("c").get<double>();
  s.m_mean = j.at("m")[0].get<double>();
  s.m_sd = j.at("m")[1].get<double>();
  s.w_mean = j.at("w")[0].get<double>();
  s.w_sd = j.at("w")[1].get<double>();
  s.ly_mean = j.at("ly")[0].get<double>();
  s.ly_sd = j.at("ly")[1].get<double>();
  s.v_mean = j.at("v_mean").get<std::vector<double>>();
  s.v_sd = j.at("v_sd").get<std::vector<double>>();
  return s;
}

Trajectory trajectory_of(const Panel& panel, std::size_t unit) {
  Trajectory tr;
  const int T = panel.periods();
  tr.m.resize(T + 1);
  tr.w.resize(T + 1);
  tr.y.resize(T + 1);
  tr.offset.assign(T + 1, 1.0);
  for (int t = 0; t <= T; ++t) {
    tr.m[t] = panel.m(unit, t);
    tr.w[t] = panel.w(unit, t);
    tr.y[t] = panel.y(unit, t);
    if (t > 0) tr.offset[t] = panel.offset(unit, t);
  }
  const auto v = panel.v(unit);
  tr.v.assign(v.begin(), v.end());
  return tr;
}

const char* design_kind_name(DesignKind k) {
  switch (k) {
    case DesignKind::OneStep: return "onestep";
    case DesignKind::FullHistory: return "full";
    case DesignKind::InterceptOnly: return "intercept";
  }
  return "?";
}

DesignKind parse_design_kind(const std::string& s) {
  if (s == "onestep") return DesignKind::OneStep;
  if (s == "full") return DesignKind::FullHistory;
  if (s == "intercept") return DesignKind::InterceptOnly;
  throw ValidationError("unknown design kind '" + s + "'");
}

arma::rowvec design_row(DesignKind kind, Role role, int t, const Trajectory& tr, const Scaling& sc) {
  std::vector<double> x{1.0};
  if (kind == DesignKind::InterceptOnly) return arma::rowvec(x);
  const bool full = kind == DesignKind::FullHistory;
  switch (role) {
    case Role::Mediator:
      for (int k = full ? 0 : t - 1; k <= t - 1; ++k) x.push_back(sc.sm(tr.m[k]));
      for (int k = full ? 1 : t; k <= t; ++k) x.push_back(sc.sw(tr.w[k]));
      break;
    case Role::Outcome:
      for (int k = full ? 1 : t; k <= t; ++k) x.push_back(sc.sm(tr.m[k]));
      for (int k = full ? 1 : t; k <= t; ++k) x.push_back(sc.sw(tr.w[k]));
      for (int k = full ? 0 : t - 1; k <= t - 1; ++k) x.push_back(sc.sly(tr.y[k]));
      break;
    case Role::Confounder:
      for (int k = full ? 1 : t; k <= t; ++k) x.push_back(sc.sm(tr.m[k]));
      for (int k = full ? 1 : t; k <= t; ++k) x.push_back(sc.sw(tr.w[k]));
      break;
  }
  for (std::size_t j = 0; j < tr.v.size(); ++j) x.push_back(sc.sv(j, tr.v[j]));
  return arma::rowvec(x);
}

std::vector<std::string> design_names(DesignKind kind, Role role, int t, const std::vector<std::string>& covariates) {
  std::vector<std::string> n{"(intercept)"};
  if (kind == DesignKind::InterceptOnly) return n;
  const bool full = kind == DesignKind::FullHistory;
  auto add = [&](const char* var, int from, int to) {
    for (int k = from; k <= to; ++k) n.push_back(std::string(var) + "(" + std::to_string(k) + ")");
  };
  switch (role) {
    case Role::Mediator:
      add("M", full ? 0 : t - 1, t - 1);
      add("W", full ? 1 : t, t);
      break;
    case Role::Outcome:
      add("M", full ? 1 : t, t);
      add("W", full ? 1 : t, t);
      add("lagY", full ? 0 : t - 1, t - 1);
      break;
    case Role::Confounder:
      add("M", full ? 1 : t, t);
      add("W", full ? 1 : t, t);
      break;
  }
  for (const auto& c : covariates) n.push_back(c);
  return n;
}

Family role_family(Role role, const Scaling& sc) {
  return role == Role::Outcome && !sc.gaussian_outcome ? Family::Poisson : Family::Normal;
}

double model_response(Role role, int t, const Trajectory& tr, const Scaling& sc) {
  switch (role) {
    case Role::Mediator: return sc.sm(tr.m[t]);
    case Role::Confounder: return sc.sw(tr.w[t + 1]);
    case Role::Outcome: return sc.gaussian_outcome ? sc.sly(tr.y[t]) : tr.y[t];
  }
  return 0.0;
}

double data_response(Role role, double value, const Scaling& sc) {
  switch (role) {
    case Role::Mediator: return sc.m_mean + sc.m_sd * value;
    case Role::Confounder: return sc.w_mean + sc.w_sd * value;
    case Role::Outcome: return sc.gaussian_outcome ? sc.ly_mean + sc.ly_sd * value : value;
  }
  return value;
}

NodeData node_data(const Panel& panel, const Scaling& sc, DesignKind kind, Role role,
                   const std::vector<int>& prefix) {
  const int t = static_cast<int>(prefix.size());
  if (t < 1 || t > panel.periods()) throw ValidationError("node_data: prefix length out of range");
  if (role == Role::Confounder && t >= panel.periods())
    throw ValidationError("node_data: no confounder model at the final time");
  NodeData d;
  d.units = panel.matching(prefix);
  const std::size_t n = d.units.size();
  if (n == 0) return d;
  const std::size_t p = design_names(kind, role, t, panel.covariate_names()).size();
  d.X.set_size(n, p);
  d.y.set_size(n);
  d.offset.ones(n);
  const bool poisson = role_family(role, sc) == Family::Poisson;
  for (std::size_t i = 0; i < n; ++i) {
    const auto tr = trajectory_of(panel, d.units[i]);
    d.X.row(i) = design_row(kind, role, t, tr, sc);
    d.y[i] = model_response(role, t, tr, sc);
    if (poisson) d.offset[i] = tr.offset[t];
  }
  return d;
}

}  // namespace medchain
