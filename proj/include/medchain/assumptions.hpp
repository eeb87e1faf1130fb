#ifndef MEDCHAIN_ASSUMPTIONS_HPP
#define MEDCHAIN_ASSUMPTIONS_HPP

#include <string>
#include <vector>

#include "json.hpp"

namespace medchain {

struct Assumption {
  std::string id;
  std::string statement;
  std::string citation;
  std::string justification;
};

/// Identification contract carried by every effect estimate. These are
/// statements about counterfactual laws and are never checked at runtime;
/// the homogeneity entry records the tilt parameter chi of the analysis.
struct AssumptionLedger {
  std::vector<Assumption> entries;
  double chi = 1.0;

  static const std::vector<std::string>& required_ids();
  static AssumptionLedger defaults(double chi = 1.0);

  const Assumption* find(const std::string& id) const;
  /// Throws ValidationError naming any missing entry or an invalid chi.
  void validate() const;
  void set_justification(const std::string& id, const std::string& text);
};

nlohmann::json to_json(const AssumptionLedger& ledger);
AssumptionLedger ledger_from_json(const nlohmann::json& j);

struct EffectEstimate;

/// Validates the ledger and embeds it in the estimate.
EffectEstimate attach_ledger(EffectEstimate estimate, const AssumptionLedger& ledger);

}  // namespace medchain

#endif
