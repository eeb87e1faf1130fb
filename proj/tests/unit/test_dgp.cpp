#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "medchain/dgp.hpp"
#include "medchain/stats.hpp"

using namespace medchain;

namespace {

double normal_cdf(double x, double mu, double sd) { return 0.5 * std::erfc(-(x - mu) / (sd * std::sqrt(2.0))); }

double ks_to_normal(std::vector<double> x, double mu, double sd) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i], mu, sd);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

double skewness(const std::vector<double>& x) {
  const double m = stats::mean(x), s = stats::sd(x);
  double acc = 0.0;
  for (double v : x) acc += std::pow((v - m) / s, 3);
  return acc / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("attenuation schedules") {
  const auto c1 = attenuate({1.0}, Schedule::Case1, 3);
  CHECK(c1[0][0] == doctest::Approx(1.0));
  CHECK(c1[1][0] == doctest::Approx(0.85));
  CHECK(c1[2][0] == doctest::Approx(0.7225));
  const auto c3 = attenuate({1.0}, Schedule::Case3, 4);
  CHECK(c3[1][0] == doctest::Approx(0.70));
  CHECK(c3[2][0] == doctest::Approx(0.805));
  CHECK(c3[3][0] == doctest::Approx(0.644));
  const auto c2 = attenuate({2.0}, Schedule::Case2, 2);
  CHECK(c2[1][0] == doctest::Approx(1.4));
  for (auto s : {Schedule::Case1, Schedule::Case2, Schedule::Case3})
    for (const auto& row : attenuate({0.0}, s, 4)) CHECK(row[0] == 0.0);
  CHECK_THROWS_AS(parse_schedule("case9"), ValidationError);
}

TEST_CASE("older lags are attenuated by 1/10 per step on top of the schedule") {
  CHECK(lagged_coefficient(1.0, Schedule::Case1, 3, 0) == doctest::Approx(0.7225));
  CHECK(lagged_coefficient(1.0, Schedule::Case1, 3, 1) == doctest::Approx(0.085));
  CHECK(lagged_coefficient(1.0, Schedule::Case1, 3, 2) == doctest::Approx(0.01));
  CHECK(lagged_coefficient(1.0, Schedule::Case1, 3, 3) == 0.0);
}

TEST_CASE("default config fixture matches the built-in defaults and round-trips") {
  const DgpConfig fixture = load_dgp_config(std::string(MEDCHAIN_DATA_DIR) + "/dgp_default.json");
  CHECK(to_json(fixture) == to_json(DgpConfig{}));
  DgpConfig c;
  c.schedule = Schedule::Case3;
  c.n = 77;
  c.identity_outcome = true;
  CHECK(to_json(dgp_config_from_json(to_json(c))) == to_json(c));
  CHECK_THROWS_AS(dgp_config_from_json({{"xi", -1.0}}), ValidationError);
  CHECK_THROWS_AS(dgp_config_from_json({{"schedule", "bogus"}}), ValidationError);
}

TEST_CASE("same seed gives bit-identical panels") {
  DgpConfig c;
  c.n = 200;
  c.seed = 42;
  const auto a = format_panel(simulate_panel(c));
  const auto b = format_panel(simulate_panel(c));
  CHECK(a == b);
  c.seed = 43;
  CHECK(format_panel(simulate_panel(c)) != a);
}

TEST_CASE("shape-zero mediator noise is normal") {
  DgpConfig c;
  c.n = 5000;
  c.T = 1;
  c.psi = 0.0;
  c.xi = 1.3;
  c.mediator.m = c.mediator.z = c.mediator.x = 0.0;
  c.mediator.v = {0.0, 0.0};
  const Panel p = simulate_panel(c);
  std::vector<double> m;
  for (std::size_t u = 0; u < p.units(); ++u) m.push_back(p.m(u, 1));
  // 1% Kolmogorov-Smirnov critical value and a 3-SE skewness band.
  CHECK(ks_to_normal(m, c.mediator.intercept, c.xi) < 1.63 / std::sqrt(5000.0));
  CHECK(std::abs(skewness(m)) < 3.0 * std::sqrt(6.0 / 5000.0));
}

TEST_CASE("positive shape gives right-skewed mediator noise") {
  DgpConfig c;
  c.n = 5000;
  c.T = 1;
  c.psi = 4.0;
  c.mediator.m = c.mediator.z = c.mediator.x = 0.0;
  c.mediator.v = {0.0, 0.0};
  const Panel p = simulate_panel(c);
  std::vector<double> m;
  for (std::size_t u = 0; u < p.units(); ++u) m.push_back(p.m(u, 1));
  CHECK(skewness(m) > 0.3);
  const double shift = stats::skewnormal_mean_shift(c.xi, c.psi);
  CHECK(std::abs(stats::mean(m) - c.mediator.intercept - shift) < 4.0 * stats::sd(m) / std::sqrt(5000.0));
}

TEST_CASE("mirrored equal-weight confounder mixture has mean zero") {
  DgpConfig c;
  c.n = 4000;
  c.T = 2;
  c.confounder.intercept_a = -3.0;
  c.confounder.intercept_b = 3.0;
  c.confounder.m = c.confounder.z = c.confounder.x = 0.0;
  c.confounder.v = {0.0, 0.0};
  const Panel p = simulate_panel(c);
  for (int t = 1; t <= 2; ++t) {
    std::vector<double> w;
    for (std::size_t u = 0; u < p.units(); ++u) w.push_back(p.w(u, t));
    CHECK(std::abs(stats::mean(w)) < 4.0 * stats::sd(w) / std::sqrt(4000.0));
  }
}

TEST_CASE("W(2) moments match the analytic mixture moments") {
  DgpConfig c;  // n = 1573, T = 4
  c.seed = 5;
  const Panel p = simulate_panel(c);
  const double n = static_cast<double>(p.units());
  std::vector<double> r1, r2;
  for (std::size_t u = 0; u < p.units(); ++u) {
    const auto mm = confounder_moments(c, p, u, 2);
    const double w = p.w(u, 2);
    r1.push_back(w - mm.mean);
    r2.push_back(w * w - (mm.variance + mm.mean * mm.mean));
  }
  CHECK(std::abs(stats::mean(r1)) < 3.0 * stats::sd(r1) / std::sqrt(n));
  CHECK(std::abs(stats::mean(r2)) < 3.0 * stats::sd(r2) / std::sqrt(n));
}

TEST_CASE("treated arm grows over time under the default treatment model") {
  DgpConfig c;
  const Panel p = simulate_panel(c);
  std::vector<int> treated(c.T + 1, 0);
  for (std::size_t u = 0; u < p.units(); ++u)
    for (int t = 1; t <= c.T; ++t) treated[t] += p.z(u, t);
  for (int t = 2; t <= c.T; ++t) CHECK(treated[t] >= treated[t - 1]);
}

TEST_CASE("Poisson overflow names the unit and time") {
  DgpConfig c;
  c.n = 5;
  c.T = 1;
  c.outcome.intercept = 40.0;
  try {
    simulate_panel(c);
    FAIL("expected overflow");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(unit 0, t 0)") != std::string::npos);
    CHECK(msg.find("intercept=40") != std::string::npos);
  }
  DgpConfig d;
  d.n = 5;
  d.T = 1;
  d.outcome.m = 500.0;
  try {
    simulate_panel(d);
    FAIL("expected overflow");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(", t 1)") != std::string::npos);
    CHECK(msg.find("m=500") != std::string::npos);
  }
}

TEST_CASE("truth oracle: identical histories give exactly zero effects") {
  DgpConfig c;
  const auto o = true_effects(c, Contrast{{0, 1, 1}, {0, 1, 1}}, 2000, 3);
  CHECK(o.nde == 0.0);
  CHECK(o.nie == 0.0);
  CHECK(o.te == 0.0);
}

TEST_CASE("truth oracle: severed mediator path gives NIE = 0") {
  DgpConfig c;
  c.outcome.m = c.outcome.mz = c.outcome.mx = 0.0;
  const auto o = true_effects(c, Contrast::final_switch(3), 20000, 8);
  CHECK(std::abs(o.nie) <= 3.0 * o.se_nie + 1e-15);
}

TEST_CASE("truth oracle: linear-Gaussian one-period NIE is the product of coefficients") {
  DgpConfig c;
  c.T = 1;
  c.identity_outcome = true;
  c.outcome.mz = c.outcome.mx = 0.0;
  c.outcome.m = 0.8;
  c.outcome.z = 1.5;
  c.mediator.z = -1.2;
  const auto o = true_effects(c, Contrast::final_switch(1), 20000, 4);
  CHECK(std::abs(o.nie - 0.8 * -1.2) <= 3.0 * o.se_nie + 1e-12);
  CHECK(std::abs(o.nde - 1.5) <= 3.0 * o.se_nde + 1e-12);
}

TEST_CASE("truth oracle: additivity and SE reporting") {
  DgpConfig c;
  const auto o = true_effects(c, Contrast::final_switch(2), 5000, 12, 2);
  CHECK(std::abs(o.te - (o.nde + o.nie)) <= 2.0 * std::hypot(o.se_nde, o.se_nie));
  CHECK(o.se_te > 0.0);
  CHECK(o.warnings.empty());
  const auto small = true_effects(c, Contrast::final_switch(2), 500, 12);
  CHECK(!small.warnings.empty());
  CHECK_THROWS_AS(true_effects(c, Contrast{{1, 1}, {0, 0}}, 2000, 1), ValidationError);
}

TEST_CASE("truth oracle is independent of the worker count") {
  DgpConfig c;
  const auto a = true_effects(c, Contrast::final_switch(2), 10000, 77, 1);
  const auto b = true_effects(c, Contrast::final_switch(2), 10000, 77, 3);
  CHECK(a.nde == b.nde);
  CHECK(a.nie == b.nie);
  CHECK(a.se_te == b.se_te);
}
