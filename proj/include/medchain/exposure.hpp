#ifndef MEDCHAIN_EXPOSURE_HPP
#define MEDCHAIN_EXPOSURE_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

namespace medchain {

/// Monthly SO2 emission total of one plant.
struct EmissionRecord {
  std::string plant_id;
  int month = 0;
  double emission = 0.0;  // > 0
};

/// Fraction of a plant's air-mass trajectories that cover a zip in a month.
struct LinkWeight {
  std::string plant_id;
  std::string zip_id;
  int month = 0;
  double weight = 0.0;  // in [0, 1]
};

/// Zip-level exposure: sum over linked plants and selected months of
/// f(E) * W_link, with f = log when `use_log`, identity otherwise.
/// Zips with no link in the selected months are omitted.
std::map<std::string, double> compute_exposure(const std::vector<EmissionRecord>& emissions,
                                               const std::vector<LinkWeight>& links,
                                               const std::set<int>& months, bool use_log = true);

/// 1 (low-exposure arm) iff level < cutoff; ties go to the high arm (0).
std::map<std::string, int> dichotomize(const std::map<std::string, double>& levels, double cutoff);

double median_level(const std::map<std::string, double>& levels);
double mean_level(const std::map<std::string, double>& levels);

std::vector<EmissionRecord> load_emissions(const std::string& path);
std::vector<LinkWeight> load_links(const std::string& path);

}  // namespace medchain

#endif
