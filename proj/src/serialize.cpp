#include "medchain/serialize.hpp"

#include <fstream>
#include <sstream>

#include "medchain/json_util.hpp"

namespace medchain {

namespace jsonio {

nlohmann::json read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open " + path);
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void write_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path);
  f << j.dump(2) << '\n';
  if (!f) throw ValidationError("cannot write " + path);
}

}  // namespace jsonio

namespace {

nlohmann::json summary_json(const Summary& s) {
  return {{"mean", s.mean}, {"median", s.median}, {"lo95", s.lo95}, {"hi95", s.hi95}, {"sd", s.sd}};
}

}  // namespace

nlohmann::json effect_draws_json(const EffectEstimate& e) {
  return {{"mean_a", e.mean_a}, {"mean_b", e.mean_b}, {"mean_c", e.mean_c},
          {"nde", e.nde},       {"nie", e.nie},       {"te", e.te}};
}

nlohmann::json to_json(const EffectEstimate& e, bool include_draws, const std::string& draws_ref) {
  if (!e.ledger) throw ValidationError("effect estimate has no assumption ledger; refusing to serialize");
  e.ledger->validate();
  nlohmann::json j{{"format", "medchain-effects-v1"},
                   {"model", e.model},
                   {"contrast", e.contrast.to_string()},
                   {"t", e.contrast.t()},
                   {"n_mc", e.n_mc},
                   {"n_draws", e.te.size()},
                   {"nde", summary_json(e.nde_summary())},
                   {"nie", summary_json(e.nie_summary())},
                   {"te", summary_json(e.te_summary())},
                   {"mc_se", {{"mean_a", e.mc_se_a}, {"mean_b", e.mc_se_b}, {"mean_c", e.mc_se_c}}},
                   {"warnings", e.warnings},
                   {"assumptions", to_json(*e.ledger)}};
  if (include_draws) j["draws"] = effect_draws_json(e);
  if (!draws_ref.empty()) j["draws_file"] = draws_ref;
  return j;
}

EffectEstimate effect_from_json(const nlohmann::json& j) {
  EffectEstimate e;
  try {
    if (j.at("format").get<std::string>() != "medchain-effects-v1")
      throw ValidationError("effects file: unknown format");
    e.model = j.at("model").get<std::string>();
    e.contrast = Contrast::parse(j.at("contrast").get<std::string>());
    e.n_mc = j.at("n_mc").get<std::size_t>();
    e.mc_se_a = j.at("mc_se").at("mean_a").get<double>();
    e.mc_se_b = j.at("mc_se").at("mean_b").get<double>();
    e.mc_se_c = j.at("mc_se").at("mean_c").get<double>();
    e.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("draws")) {
      const auto& d = j.at("draws");
      e.mean_a = d.at("mean_a").get<std::vector<double>>();
      e.mean_b = d.at("mean_b").get<std::vector<double>>();
      e.mean_c = d.at("mean_c").get<std::vector<double>>();
      e.nde = d.at("nde").get<std::vector<double>>();
      e.nie = d.at("nie").get<std::vector<double>>();
      e.te = d.at("te").get<std::vector<double>>();
    }
    if (!j.contains("assumptions")) throw ValidationError("effects file: missing assumptions block");
    e.ledger = ledger_from_json(j.at("assumptions"));
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("effects file: ") + ex.what());
  }
  return e;
}

nlohmann::json to_json(const BenchResult& r) {
  auto rows = nlohmann::json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"model", x.model},
                    {"effect", x.effect},
                    {"t", x.t},
                    {"truth", x.truth},
                    {"truth_se", x.truth_se},
                    {"bias", x.bias},
                    {"mse", x.mse},
                    {"bias_se", x.bias_se},
                    {"mse_se", x.mse_se},
                    {"reps", x.reps}});
  auto failures = nlohmann::json::array();
  for (const auto& f : r.failures) failures.push_back({{"rep", f.rep}, {"model", f.model}, {"message", f.message}});
  return {{"format", "medchain-bench-v1"},
          {"case", r.case_id},
          {"case_label", r.case_label},
          {"reps", r.reps},
          {"config", to_json(r.config)},
          {"rows", rows},
          {"failures", failures},
          {"estimates", r.estimates}};
}

BenchResult bench_result_from_json(const nlohmann::json& j) {
  BenchResult r;
  try {
    if (j.at("format").get<std::string>() != "medchain-bench-v1") throw ValidationError("bench file: unknown format");
    r.case_id = j.at("case").get<int>();
    r.case_label = j.at("case_label").get<std::string>();
    r.reps = j.at("reps").get<int>();
    r.config = bench_config_from_json(j.at("config"));
    for (const auto& x : j.at("rows")) {
      BenchRow b;
      b.model = x.at("model").get<std::string>();
      b.effect = x.at("effect").get<std::string>();
      b.t = x.at("t").get<int>();
      b.truth = x.at("truth").get<double>();
      b.truth_se = x.at("truth_se").get<double>();
      b.bias = x.at("bias").get<double>();
      b.mse = x.at("mse").get<double>();
      b.bias_se = x.at("bias_se").get<double>();
      b.mse_se = x.at("mse_se").get<double>();
      b.reps = x.at("reps").get<std::size_t>();
      r.rows.push_back(std::move(b));
    }
    for (const auto& f : j.at("failures"))
      r.failures.push_back({f.at("rep").get<int>(), f.at("model").get<std::string>(), f.at("message").get<std::string>()});
    r.estimates = j.at("estimates").get<std::map<std::string, std::vector<double>>>();
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("bench file: ") + ex.what());
  }
  return r;
}

}  // namespace medchain
