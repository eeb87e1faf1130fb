#ifndef MEDCHAIN_PANEL_HPP
#define MEDCHAIN_PANEL_HPP

#include <span>
#include <string>
#include <vector>

#include "medchain/common.hpp"

namespace medchain {

/// Longitudinal exposure / confounder / mediator / outcome record.
///
/// Time-varying series are indexed t = 1..T; index 0 of the mediator,
/// confounder and outcome accessors returns the unit's baseline value.
/// Z = 1 marks the low-exposure arm.
class Panel {
 public:
  Panel() = default;
  Panel(std::size_t units, int periods, std::vector<std::string> covariate_names);

  std::size_t units() const { return unit_ids_.size(); }
  int periods() const { return periods_; }
  std::size_t covariates() const { return covariate_names_.size(); }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }

  const std::string& unit_id(std::size_t u) const { return unit_ids_[u]; }
  std::string& unit_id(std::size_t u) { return unit_ids_[u]; }

  int z(std::size_t u, int t) const { return z_[cell(u, t)]; }
  int& z(std::size_t u, int t) { return z_[cell(u, t)]; }

  double w(std::size_t u, int t) const { return t == 0 ? w0_[u] : w_[cell(u, t)]; }
  double& w(std::size_t u, int t) { return t == 0 ? w0_[u] : w_[cell(u, t)]; }
  double m(std::size_t u, int t) const { return t == 0 ? m0_[u] : m_[cell(u, t)]; }
  double& m(std::size_t u, int t) { return t == 0 ? m0_[u] : m_[cell(u, t)]; }
  double y(std::size_t u, int t) const { return t == 0 ? y0_[u] : y_[cell(u, t)]; }
  double& y(std::size_t u, int t) { return t == 0 ? y0_[u] : y_[cell(u, t)]; }
  double offset(std::size_t u, int t) const { return offset_[cell(u, t)]; }
  double& offset(std::size_t u, int t) { return offset_[cell(u, t)]; }

  std::span<const double> v(std::size_t u) const {
    return {v_.data() + u * covariates(), covariates()};
  }
  double& v(std::size_t u, std::size_t j) { return v_[u * covariates() + j]; }

  /// Units whose observed treatment history equals `prefix` (length <= T).
  std::vector<std::size_t> matching(std::span<const int> prefix) const;

  /// Copy with units reordered by `order` (a permutation of 0..units-1).
  Panel permuted(std::span<const std::size_t> order) const;
  /// Copy restricted to the first `periods` time points.
  Panel truncated(int periods) const;

 private:
  std::size_t cell(std::size_t u, int t) const {
    return u * static_cast<std::size_t>(periods_) + static_cast<std::size_t>(t - 1);
  }

  int periods_ = 0;
  std::vector<std::string> unit_ids_;
  std::vector<std::string> covariate_names_;
  std::vector<int> z_;
  std::vector<double> w_, m_, y_, offset_;
  std::vector<double> v_;
  std::vector<double> y0_, m0_, w0_;
};

struct Violation {
  std::string unit;
  int t = 0;  // 0 for baseline / unit-level fields
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

struct PanelRules {
  /// Require Y to be a nonnegative integer (Poisson outcome); relaxed for
  /// continuous-outcome analyses.
  bool count_outcome = true;
};

ValidationReport validate_panel(const Panel& panel, PanelRules rules = {});

/// Thrown by load_panel; carries the full report.
class PanelValidationError : public ValidationError {
 public:
  explicit PanelValidationError(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Loads the panel CSV (`unit_id,t,Z,W,M,Y,offset,V1..Vk,Y0,M0,W0`). Any
/// covariate columns other than the fixed ones are taken as V, in file
/// order. Throws ValidationError for schema problems and
/// PanelValidationError listing every invariant violation.
Panel load_panel(const std::string& path, PanelRules rules = {});
Panel parse_panel(const std::string& text, PanelRules rules = {});

void write_panel(const std::string& path, const Panel& panel);
std::string format_panel(const Panel& panel);

}  // namespace medchain

#endif
