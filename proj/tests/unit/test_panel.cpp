#include <cmath>
#include <random>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "medchain/csv.hpp"
#include "medchain/exposure.hpp"
#include "medchain/panel.hpp"

using namespace medchain;

namespace {

const std::string kFixture = std::string(MEDCHAIN_DATA_DIR) + "/panel_fixture.csv";

std::string fixture_text() {
  std::ifstream f(kFixture);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string replace_first(std::string s, const std::string& from, const std::string& to) {
  const auto p = s.find(from);
  REQUIRE(p != std::string::npos);
  return s.replace(p, from.size(), to);
}

}  // namespace

TEST_CASE("fixture panel loads with T=2") {
  const Panel p = load_panel(kFixture);
  CHECK(p.periods() == 2);
  CHECK(p.units() == 3);
  CHECK(p.covariates() == 2);
  CHECK(p.unit_id(1) == "b");
  CHECK(p.z(1, 1) == 1);
  CHECK(p.y(2, 1) == 9.0);
  CHECK(p.m(0, 0) == 15.1);
  CHECK(p.offset(1, 2) == 121.0);
}

TEST_CASE("Z=2 is reported against field Z") {
  const auto text = replace_first(fixture_text(), "a,2,1,", "a,2,2,");
  try {
    parse_panel(text);
    FAIL("expected a validation error");
  } catch (const PanelValidationError& e) {
    bool named = false;
    for (const auto& v : e.report().violations)
      if (v.field == "Z" && v.unit == "a" && v.t == 2) named = true;
    CHECK(named);
  }
}

TEST_CASE("every violation is reported, not just the first") {
  auto text = replace_first(fixture_text(), "a,2,1,", "a,2,2,");
  text = replace_first(text, ",120.25,", ",-1,");
  text = replace_first(text, "c,1,0,25.8,16.7,9,", "c,1,0,25.8,16.7,2.5,");
  try {
    parse_panel(text);
    FAIL("expected a validation error");
  } catch (const PanelValidationError& e) {
    std::set<std::string> fields;
    for (const auto& v : e.report().violations) fields.insert(v.field);
    CHECK(fields.count("Z") == 1);
    CHECK(fields.count("offset") == 1);
    CHECK(fields.count("Y") == 1);
  }
}

TEST_CASE("missing offset column is a schema error naming the required columns") {
  std::string text = fixture_text();
  // drop the offset column from every line
  std::stringstream in(text), out;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    f.erase(f.begin() + 6);
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << f[i];
    out << '\n';
  }
  try {
    parse_panel(out.str());
    FAIL("expected a schema error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("offset") != std::string::npos);
    CHECK(msg.find("unit_id") != std::string::npos);
  }
}

TEST_CASE("ragged series and non-constant baselines are rejected") {
  auto text = fixture_text();
  const auto pos = text.find("b,2,1");
  const auto end = text.find('\n', pos);
  const std::string ragged = text.substr(0, pos) + text.substr(end + 1);
  CHECK_THROWS_AS(parse_panel(ragged), ValidationError);
  const auto shifted = replace_first(text, "121.0,0.2,0.31,1,13.0,27.8", "121.0,0.2,0.31,1,13.5,27.8");
  CHECK_THROWS_AS(parse_panel(shifted), ValidationError);
}

TEST_CASE("non-integer Y is accepted for continuous outcomes only") {
  const auto text = replace_first(fixture_text(), "c,1,0,25.8,16.7,9,", "c,1,0,25.8,16.7,2.5,");
  CHECK_THROWS_AS(parse_panel(text), PanelValidationError);
  const Panel p = parse_panel(text, PanelRules{false});
  CHECK(p.y(2, 1) == 2.5);
}

TEST_CASE("load, serialize, load round-trips numeric fields bit-exactly") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  Panel p(7, 3, {"urban", "elevation"});
  for (std::size_t u = 0; u < 7; ++u) {
    p.unit_id(u) = "unit" + std::to_string(u);
    p.v(u, 0) = nd(rng);
    p.v(u, 1) = std::exp(nd(rng)) / 3.0;
    for (int t = 0; t <= 3; ++t) {
      p.w(u, t) = 27.0 + nd(rng) / 7.0;
      p.m(u, t) = 15.0 + nd(rng) * 1e-3;
      p.y(u, t) = static_cast<double>(rng() % 20);
      if (t > 0) {
        p.z(u, t) = static_cast<int>(rng() % 2);
        p.offset(u, t) = std::exp(nd(rng)) * 123.456789;
      }
    }
  }
  const Panel q = parse_panel(format_panel(p));
  const Panel r = parse_panel(format_panel(q));
  REQUIRE(r.units() == p.units());
  for (std::size_t u = 0; u < p.units(); ++u) {
    CHECK(r.unit_id(u) == p.unit_id(u));
    for (std::size_t j = 0; j < 2; ++j) CHECK(r.v(u)[j] == p.v(u)[j]);
    for (int t = 0; t <= 3; ++t) {
      CHECK(r.w(u, t) == p.w(u, t));
      CHECK(r.m(u, t) == p.m(u, t));
      CHECK(r.y(u, t) == p.y(u, t));
      if (t > 0) {
        CHECK(r.z(u, t) == p.z(u, t));
        CHECK(r.offset(u, t) == p.offset(u, t));
      }
    }
  }
}

TEST_CASE("matching selects units by observed treatment prefix") {
  const Panel p = load_panel(kFixture);
  const std::vector<int> z0{0};
  CHECK(p.matching(z0) == std::vector<std::size_t>{0, 2});
  const std::vector<int> z01{0, 1};
  CHECK(p.matching(z01) == std::vector<std::size_t>{0});
}

// ---- exposure -------------------------------------------------------------------

TEST_CASE("single plant, single month, identity transform") {
  const auto lv = compute_exposure({{"p", 1, 100.0}}, {{"p", "z", 1, 1.0}}, {1}, false);
  REQUIRE(lv.size() == 1);
  CHECK(lv.at("z") == 100.0);
}

TEST_CASE("all-zero linkage gives zero exposure") {
  const auto lv = compute_exposure({{"p", 1, 100.0}, {"q", 1, 50.0}},
                                   {{"p", "z1", 1, 0.0}, {"q", "z2", 1, 0.0}}, {1}, true);
  for (const auto& [zip, level] : lv) CHECK(level == 0.0);
}

TEST_CASE("exposure input errors") {
  CHECK_THROWS_AS(compute_exposure({{"p", 1, 100.0}}, {{"x", "z", 1, 0.5}}, {1}, true), ValidationError);
  try {
    compute_exposure({{"p", 1, 100.0}}, {{"x", "z", 1, 0.5}}, {1}, true);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
  CHECK_THROWS_AS(compute_exposure({{"p", 1, -3.0}}, {{"p", "z", 1, 0.5}}, {1}, true), ValidationError);
  CHECK_THROWS_AS(compute_exposure({{"p", 1, 3.0}}, {{"p", "z", 1, 1.5}}, {1}, true), ValidationError);
  CHECK_THROWS_AS(compute_exposure({{"p", 1, 3.0}}, {{"p", "z", 1, 0.5}}, {}, true), ValidationError);
  CHECK_THROWS_AS(dichotomize({{"a", std::nan("")}}, 1.0), ValidationError);
}

namespace {

struct Instance {
  std::vector<EmissionRecord> em;
  std::vector<LinkWeight> ln;
  std::set<int> months;
};

Instance random_instance(std::mt19937_64& rng, int plants, int months, int zips) {
  std::uniform_real_distribution<double> ue(1.5, 50000.0), uw(0.0, 1.0);
  Instance in;
  for (int j = 0; j < plants; ++j)
    for (int h = 1; h <= months; ++h) in.em.push_back({"p" + std::to_string(j), h, ue(rng)});
  for (int j = 0; j < plants; ++j)
    for (int i = 0; i < zips; ++i)
      for (int h = 1; h <= months; ++h)
        if (uw(rng) < 0.6) in.ln.push_back({"p" + std::to_string(j), "z" + std::to_string(i), h, uw(rng)});
  for (int h = 1; h <= months; ++h)
    if (uw(rng) < 0.8 || h == 1) in.months.insert(h);
  return in;
}

// Independent double loop over zips and (plant, month) pairs.
std::map<std::string, double> brute_force(const Instance& in, bool use_log) {
  std::set<std::string> zips;
  for (const auto& l : in.ln)
    if (in.months.count(l.month)) zips.insert(l.zip_id);
  std::map<std::string, double> out;
  for (const auto& zip : zips) {
    double s = 0.0;
    for (const auto& e : in.em) {
      if (!in.months.count(e.month)) continue;
      for (const auto& l : in.ln)
        if (l.zip_id == zip && l.plant_id == e.plant_id && l.month == e.month)
          s += (use_log ? std::log(e.emission) : e.emission) * l.weight;
    }
    out[zip] = s;
  }
  return out;
}

}  // namespace

TEST_CASE("exposure equals the brute-force double loop on random instances") {
  std::mt19937_64 rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    const auto in = random_instance(rng, 3, 2, 6);
    for (bool use_log : {true, false}) {
      const auto got = compute_exposure(in.em, in.ln, in.months, use_log);
      const auto want = brute_force(in, use_log);
      REQUIRE(got.size() == want.size());
      for (const auto& [zip, v] : want) CHECK(std::abs(got.at(zip) - v) <= 1e-12 * std::max(1.0, std::abs(v)));
    }
  }
}

TEST_CASE("exposure is monotone in emissions and additive over disjoint plants") {
  std::mt19937_64 rng(7);
  const auto in = random_instance(rng, 4, 3, 5);
  const auto base = compute_exposure(in.em, in.ln, in.months, true);
  auto bumped = in.em;
  bumped[2].emission *= 3.0;
  const auto up = compute_exposure(bumped, in.ln, in.months, true);
  for (const auto& [zip, v] : base) CHECK(up.at(zip) >= v);

  Instance a = in, b = in;
  a.ln.clear();
  b.ln.clear();
  for (const auto& l : in.ln) (l.plant_id == "p0" || l.plant_id == "p1" ? a.ln : b.ln).push_back(l);
  const auto ea = compute_exposure(in.em, a.ln, in.months, true);
  const auto eb = compute_exposure(in.em, b.ln, in.months, true);
  for (const auto& [zip, v] : base) {
    const double sa = ea.count(zip) ? ea.at(zip) : 0.0;
    const double sb = eb.count(zip) ? eb.at(zip) : 0.0;
    CHECK(v == doctest::Approx(sa + sb).epsilon(1e-12));
  }
}

TEST_CASE("dichotomize: ties go to the high arm and side counts match a recount") {
  std::map<std::string, double> lv{{"a", 1.0}, {"b", 2.0}, {"c", 2.0}, {"d", 5.0}};
  const auto z = dichotomize(lv, 2.0);
  CHECK(z.at("a") == 1);
  CHECK(z.at("b") == 0);
  CHECK(z.at("c") == 0);
  CHECK(z.at("d") == 0);

  const auto all_low = dichotomize(lv, 100.0);
  for (const auto& [k, v] : all_low) CHECK(v == 1);

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(5000.0, 20000.0);
  std::map<std::string, double> levels;
  for (int i = 0; i < 2000; ++i) levels["z" + std::to_string(i)] = std::round(u(rng));
  // 12437 and 12953 are the median and mean cutoffs quoted for the application.
  for (double cut : {12437.0, 12953.0, median_level(levels), mean_level(levels)}) {
    const auto arms = dichotomize(levels, cut);
    std::size_t low = 0, high = 0;
    for (const auto& [zip, lvl] : levels) (lvl < cut ? low : high)++;
    std::size_t ones = 0;
    for (const auto& [zip, a] : arms) ones += a;
    CHECK(arms.size() == levels.size());
    CHECK(ones == low);
    CHECK(arms.size() - ones == high);
  }
}

TEST_CASE("exposure fixtures load from CSV") {
  const auto em = load_emissions(std::string(MEDCHAIN_DATA_DIR) + "/emissions_fixture.csv");
  const auto ln = load_links(std::string(MEDCHAIN_DATA_DIR) + "/links_fixture.csv");
  CHECK(em.size() == 4);
  CHECK(ln.size() == 6);
  const auto lv = compute_exposure(em, ln, {1, 2}, false);
  CHECK(lv.at("z3") == doctest::Approx(0.2 * 980.0).epsilon(1e-15));
  CHECK(lv.at("z1") == doctest::Approx(0.4 * 1200.5 + 0.1 * 980.0 + 0.05 * 15000.0).epsilon(1e-15));
  const auto only1 = compute_exposure(em, ln, {1}, false);
  CHECK(only1.count("z3") == 0);
}
