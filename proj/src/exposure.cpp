#include "medchain/exposure.hpp"

#include <cmath>
#include <utility>

#include "medchain/common.hpp"
#include "medchain/csv.hpp"
#include "medchain/stats.hpp"

namespace medchain {

std::map<std::string, double> compute_exposure(const std::vector<EmissionRecord>& emissions,
                                               const std::vector<LinkWeight>& links,
                                               const std::set<int>& months, bool use_log) {
  if (months.empty()) throw ValidationError("exposure: month set is empty");
  std::map<std::pair<std::string, int>, double> emission_of;
  for (const auto& e : emissions) {
    if (!(e.emission > 0.0) || !std::isfinite(e.emission))
      throw ValidationError("exposure: emission for plant " + e.plant_id + " month " + std::to_string(e.month) +
                            " must be positive");
    if (!emission_of.emplace(std::make_pair(e.plant_id, e.month), e.emission).second)
      throw ValidationError("exposure: duplicate emission record for plant " + e.plant_id + " month " +
                            std::to_string(e.month));
  }
  std::map<std::string, double> level;
  for (const auto& l : links) {
    if (!(l.weight >= 0.0 && l.weight <= 1.0))
      throw ValidationError("exposure: link weight for plant " + l.plant_id + " zip " + l.zip_id + " month " +
                            std::to_string(l.month) + " outside [0, 1]");
    auto it = emission_of.find({l.plant_id, l.month});
    if (it == emission_of.end())
      throw ValidationError("exposure: link (plant " + l.plant_id + ", month " + std::to_string(l.month) +
                            ") for zip " + l.zip_id + " has no emission record");
    if (!months.count(l.month)) continue;
    const double e = it->second;
    const double f = use_log ? std::log(e) : e;
    level[l.zip_id] += f * l.weight;
  }
  return level;
}

std::map<std::string, int> dichotomize(const std::map<std::string, double>& levels, double cutoff) {
  if (!std::isfinite(cutoff)) throw ValidationError("dichotomize: cutoff must be finite");
  std::map<std::string, int> out;
  for (const auto& [zip, v] : levels) {
    if (std::isnan(v)) throw ValidationError("dichotomize: exposure level for zip " + zip + " is NaN");
    out[zip] = v < cutoff ? 1 : 0;
  }
  return out;
}

double median_level(const std::map<std::string, double>& levels) {
  std::vector<double> v;
  for (const auto& [_, x] : levels) v.push_back(x);
  return stats::median(std::move(v));
}

double mean_level(const std::map<std::string, double>& levels) {
  std::vector<double> v;
  for (const auto& [_, x] : levels) v.push_back(x);
  return stats::mean(v);
}

namespace {

std::size_t require(const csv::Table& t, const std::string& name, const std::string& file) {
  auto c = t.column(name);
  if (!c) throw ValidationError(file + ": missing column '" + name + "'");
  return *c;
}

}  // namespace

std::vector<EmissionRecord> load_emissions(const std::string& path) {
  const auto t = csv::read(path);
  const auto cp = require(t, "plant_id", path), cm = require(t, "month", path), ce = require(t, "E", path);
  std::vector<EmissionRecord> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path + " row " + std::to_string(r + 2);
    out.push_back({row.at(cp), static_cast<int>(csv::parse_long(row.at(cm), ctx)), csv::parse_double(row.at(ce), ctx)});
  }
  return out;
}

std::vector<LinkWeight> load_links(const std::string& path) {
  const auto t = csv::read(path);
  const auto cp = require(t, "plant_id", path), cz = require(t, "zip_id", path), cm = require(t, "month", path),
             cw = require(t, "W_link", path);
  std::vector<LinkWeight> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string ctx = path + " row " + std::to_string(r + 2);
    out.push_back({row.at(cp), row.at(cz), static_cast<int>(csv::parse_long(row.at(cm), ctx)),
                   csv::parse_double(row.at(cw), ctx)});
  }
  return out;
}

}  // namespace medchain
