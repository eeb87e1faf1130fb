#ifndef MEDCHAIN_SERIALIZE_HPP
#define MEDCHAIN_SERIALIZE_HPP

#include <string>
#include <vector>

#include "json.hpp"
#include "medchain/estimands.hpp"
#include "medchain/harness.hpp"

namespace medchain {

/// Throws ValidationError when the estimate carries no assumption ledger.
/// With `include_draws` false the per-draw vectors are left out and
/// `draws_ref` (if non-empty) names the file that holds them.
nlohmann::json to_json(const EffectEstimate& e, bool include_draws = true, const std::string& draws_ref = "");
EffectEstimate effect_from_json(const nlohmann::json& j);
nlohmann::json effect_draws_json(const EffectEstimate& e);

nlohmann::json to_json(const BenchResult& r);
BenchResult bench_result_from_json(const nlohmann::json& j);

}  // namespace medchain

#endif
