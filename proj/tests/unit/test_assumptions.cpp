#include <set>

#include "doctest.h"
#include "medchain/assumptions.hpp"
#include "medchain/baselines.hpp"
#include "medchain/dgp.hpp"
#include "medchain/estimands.hpp"
#include "medchain/serialize.hpp"

using namespace medchain;

namespace {

struct Fitted {
  Panel panel;
  FittedRegime regime;
};

const Fitted& fitted() {
  static const Fitted f = [] {
    DgpConfig c;
    c.n = 300;
    c.T = 1;
    c.seed = 17;
    Panel p = simulate_panel(c);
    FittedRegime r = to_regime(fit_baselines(p, BaselineKind::RegOneStep), 20, 3);
    return Fitted{std::move(p), std::move(r)};
  }();
  return f;
}

}  // namespace

TEST_CASE("default ledger lists every required entry with chi = 1") {
  const auto l = AssumptionLedger::defaults();
  CHECK(l.chi == 1.0);
  l.validate();
  for (const auto& id : AssumptionLedger::required_ids()) {
    const Assumption* a = l.find(id);
    REQUIRE(a != nullptr);
    CHECK(!a->statement.empty());
    CHECK(a->citation == "README.md#identifying-assumptions");
    CHECK(a->justification == "not supplied");
  }
  CHECK(l.find("positivity") == nullptr);
}

TEST_CASE("effect estimates carry the default ledger; sensitivity runs record chi") {
  const auto& f = fitted();
  const auto e = effects(f.regime, f.panel, Contrast::final_switch(1), 1000, 1);
  REQUIRE(e.ledger.has_value());
  CHECK(e.ledger->chi == 1.0);
  for (double chi : {0.5, 2.0}) {
    SensitivitySpec s;
    s.chi = chi;
    const auto t = tilted_effects(f.regime, f.panel, Contrast::final_switch(1), s, 1000, 1);
    REQUIRE(t.ledger.has_value());
    CHECK(t.ledger->chi == chi);
    const auto j = to_json(t, false);
    bool seen = false;
    for (const auto& entry : j.at("assumptions"))
      if (entry.at("id") == "homogeneity-A2") {
        seen = true;
        CHECK(entry.at("sensitivity").at("parameter") == "chi");
        CHECK(entry.at("sensitivity").at("value").get<double>() == chi);
      }
    CHECK(seen);
  }
}

TEST_CASE("serialization refuses an estimate without a ledger") {
  const auto& f = fitted();
  auto e = effects(f.regime, f.panel, Contrast::final_switch(1), 1000, 2);
  e.ledger.reset();
  CHECK_THROWS_AS(to_json(e), ValidationError);
}

TEST_CASE("a missing entry or bad chi is a validation error") {
  for (const auto& id : AssumptionLedger::required_ids()) {
    auto l = AssumptionLedger::defaults();
    std::erase_if(l.entries, [&](const Assumption& a) { return a.id == id; });
    try {
      l.validate();
      FAIL("missing " << id << " accepted");
    } catch (const ValidationError& ex) {
      CHECK(std::string(ex.what()).find(id) != std::string::npos);
    }
    CHECK_THROWS_AS(attach_ledger(EffectEstimate{}, l), ValidationError);
  }
  for (double chi : {0.0, -1.0, std::numeric_limits<double>::infinity()}) {
    auto l = AssumptionLedger::defaults();
    l.chi = chi;
    CHECK_THROWS_AS(l.validate(), ValidationError);
  }
  auto l = AssumptionLedger::defaults();
  CHECK_THROWS_AS(l.set_justification("nope", "x"), ValidationError);
  l.set_justification("consistency", "treatment is recorded without error");
  CHECK(l.find("consistency")->justification == "treatment is recorded without error");
}

TEST_CASE("assumptions block schema and round trip") {
  auto l = AssumptionLedger::defaults(1.7);
  l.set_justification("ignorability", "rich covariate set");
  const auto j = to_json(l);
  REQUIRE(j.is_array());
  std::set<std::string> ids;
  for (const auto& e : j) {
    for (const char* k : {"id", "statement", "citation", "justification"}) {
      REQUIRE(e.contains(k));
      CHECK(e.at(k).is_string());
    }
    ids.insert(e.at("id").get<std::string>());
    CHECK(e.contains("sensitivity") == (e.at("id") == "homogeneity-A2"));
  }
  CHECK(ids.size() == AssumptionLedger::required_ids().size());
  const auto back = ledger_from_json(j);
  CHECK(back.chi == 1.7);
  CHECK(to_json(back) == j);

  auto broken = j;
  broken.erase(0);
  CHECK_THROWS_AS(ledger_from_json(broken), ValidationError);
  auto malformed = j;
  malformed[0].erase("statement");
  CHECK_THROWS_AS(ledger_from_json(malformed), ValidationError);

  const auto& f = fitted();
  const auto e = effects(f.regime, f.panel, Contrast::final_switch(1), 1000, 3);
  const auto ej = to_json(e);
  REQUIRE(ej.contains("assumptions"));
  CHECK(ej.at("assumptions") == to_json(*e.ledger));
  CHECK(to_json(effect_from_json(ej)) == ej);
}
