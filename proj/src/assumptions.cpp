#include "medchain/assumptions.hpp"

#include <cmath>

#include "medchain/common.hpp"
#include "medchain/estimands.hpp"

namespace medchain {

namespace {

constexpr const char* kCitation = "README.md#identifying-assumptions";

}  // namespace

const std::vector<std::string>& AssumptionLedger::required_ids() {
  static const std::vector<std::string> ids{"ignorability", "homogeneity-A2", "sutva-no-interference",
                                            "sutva-no-versions", "consistency"};
  return ids;
}

AssumptionLedger AssumptionLedger::defaults(double chi) {
  AssumptionLedger l;
  l.chi = chi;
  const std::string none = "not supplied";
  l.entries = {
      {"ignorability",
       "Given the observed past (treatments, confounders, mediators, outcomes and baseline covariates), the treatment "
       "at each time is independent of every potential mediator and outcome.",
       kCitation, none},
      {"homogeneity-A2",
       "Given the past, the outcome law at a mediator value does not depend on which treatment history produced that "
       "value. Departures are explored with the exponential tilt parameter chi (chi = 1 is no departure).",
       kCitation, none},
      {"sutva-no-interference",
       "A unit's potential mediators and outcomes do not depend on the treatments of other units.", kCitation, none},
      {"sutva-no-versions", "Each treatment and mediator level has a single version.", kCitation, none},
      {"consistency",
       "Observed mediators and outcomes equal the potential values under the treatment history actually received.",
       kCitation, none},
  };
  return l;
}

const Assumption* AssumptionLedger::find(const std::string& id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

void AssumptionLedger::validate() const {
  for (const auto& id : required_ids())
    if (!find(id)) throw ValidationError("assumption ledger: missing entry '" + id + "'");
  if (!(chi > 0.0) || !std::isfinite(chi)) throw ValidationError("assumption ledger: chi must be positive and finite");
}

void AssumptionLedger::set_justification(const std::string& id, const std::string& text) {
  for (auto& e : entries)
    if (e.id == id) {
      e.justification = text;
      return;
    }
  throw ValidationError("assumption ledger: unknown entry '" + id + "'");
}

nlohmann::json to_json(const AssumptionLedger& ledger) {
  auto arr = nlohmann::json::array();
  for (const auto& e : ledger.entries) {
    nlohmann::json j{{"id", e.id}, {"statement", e.statement}, {"citation", e.citation},
                     {"justification", e.justification}};
    if (e.id == "homogeneity-A2") j["sensitivity"] = {{"parameter", "chi"}, {"value", ledger.chi}};
    arr.push_back(std::move(j));
  }
  return arr;
}

AssumptionLedger ledger_from_json(const nlohmann::json& j) {
  AssumptionLedger l;
  try {
    for (const auto& e : j) {
      l.entries.push_back({e.at("id").get<std::string>(), e.at("statement").get<std::string>(),
                           e.at("citation").get<std::string>(), e.at("justification").get<std::string>()});
      if (e.contains("sensitivity")) l.chi = e.at("sensitivity").at("value").get<double>();
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("assumption ledger: malformed JSON: ") + ex.what());
  }
  l.validate();
  return l;
}

EffectEstimate attach_ledger(EffectEstimate estimate, const AssumptionLedger& ledger) {
  ledger.validate();
  estimate.ledger = ledger;
  return estimate;
}

}  // namespace medchain
