#ifndef MEDCHAIN_JSON_UTIL_HPP
#define MEDCHAIN_JSON_UTIL_HPP

#include <armadillo>
#include <string>

#include "json.hpp"

namespace medchain::jsonio {

inline nlohmann::json from_vec(const arma::vec& v) { return nlohmann::json(std::vector<double>(v.begin(), v.end())); }

inline arma::vec to_vec(const nlohmann::json& j) { return arma::vec(j.get<std::vector<double>>()); }

/// Row-major nested array.
inline nlohmann::json from_mat(const arma::mat& m) {
  auto out = nlohmann::json::array();
  for (arma::uword i = 0; i < m.n_rows; ++i) {
    std::vector<double> row(m.n_cols);
    for (arma::uword j = 0; j < m.n_cols; ++j) row[j] = m(i, j);
    out.push_back(row);
  }
  return out;
}

inline arma::mat to_mat(const nlohmann::json& j, arma::uword cols) {
  arma::mat m(j.size(), cols);
  for (arma::uword i = 0; i < j.size(); ++i) {
    const auto row = j[i].get<std::vector<double>>();
    if (row.size() != cols) throw nlohmann::json::other_error::create(501, "matrix row has wrong width", &j);
    for (arma::uword c = 0; c < cols; ++c) m(i, c) = row[c];
  }
  return m;
}

nlohmann::json read_file(const std::string& path);
void write_file(const std::string& path, const nlohmann::json& j);

}  // namespace medchain::jsonio

#endif
