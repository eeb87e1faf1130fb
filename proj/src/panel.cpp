#include "medchain/panel.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "medchain/csv.hpp"

namespace medchain {

Panel::Panel(std::size_t units, int periods, std::vector<std::string> covariate_names)
    : periods_(periods),
      unit_ids_(units),
      covariate_names_(std::move(covariate_names)),
      z_(units * periods, 0),
      w_(units * periods, 0.0),
      m_(units * periods, 0.0),
      y_(units * periods, 0.0),
      offset_(units * periods, 1.0),
      v_(units * covariate_names_.size(), 0.0),
      y0_(units, 0.0),
      m0_(units, 0.0),
      w0_(units, 0.0) {
  if (periods < 1) throw ValidationError("panel: T must be >= 1");
  for (std::size_t u = 0; u < units; ++u) unit_ids_[u] = std::to_string(u + 1);
}

std::vector<std::size_t> Panel::matching(std::span<const int> prefix) const {
  std::vector<std::size_t> out;
  for (std::size_t u = 0; u < units(); ++u) {
    bool match = true;
    for (std::size_t s = 0; s < prefix.size() && match; ++s) match = z(u, static_cast<int>(s) + 1) == prefix[s];
    if (match) out.push_back(u);
  }
  return out;
}

Panel Panel::permuted(std::span<const std::size_t> order) const {
  Panel p(units(), periods_, covariate_names_);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t u = order[i];
    p.unit_ids_[i] = unit_ids_[u];
    for (int t = 0; t <= periods_; ++t) {
      p.m(i, t) = m(u, t);
      p.w(i, t) = w(u, t);
      p.y(i, t) = y(u, t);
      if (t > 0) {
        p.z(i, t) = z(u, t);
        p.offset(i, t) = offset(u, t);
      }
    }
    for (std::size_t j = 0; j < covariates(); ++j) p.v(i, j) = v(u)[j];
  }
  return p;
}

Panel Panel::truncated(int periods) const {
  if (periods < 1 || periods > periods_) throw ValidationError("panel: invalid truncation length");
  Panel p(units(), periods, covariate_names_);
  for (std::size_t u = 0; u < units(); ++u) {
    p.unit_ids_[u] = unit_ids_[u];
    for (int t = 0; t <= periods; ++t) {
      p.m(u, t) = m(u, t);
      p.w(u, t) = w(u, t);
      p.y(u, t) = y(u, t);
      if (t > 0) {
        p.z(u, t) = z(u, t);
        p.offset(u, t) = offset(u, t);
      }
    }
    for (std::size_t j = 0; j < covariates(); ++j) p.v(u, j) = v(u)[j];
  }
  return p;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  os << violations.size() << " panel violation(s)";
  for (const auto& v : violations) {
    os << "\n  unit=" << v.unit << " t=" << v.t << " field=" << v.field << ": " << v.message;
  }
  return os.str();
}

PanelValidationError::PanelValidationError(ValidationReport report)
    : ValidationError(report.to_string()), report_(std::move(report)) {}

ValidationReport validate_panel(const Panel& panel, PanelRules rules) {
  ValidationReport rep;
  auto add = [&rep](const std::string& unit, int t, const std::string& field, const std::string& msg) {
    rep.violations.push_back({unit, t, field, msg});
  };
  std::set<std::string> seen;
  for (std::size_t u = 0; u < panel.units(); ++u) {
    const auto& id = panel.unit_id(u);
    if (!seen.insert(id).second) add(id, 0, "unit_id", "duplicate unit id");
    auto check_real = [&](double x, int t, const char* field) {
      if (!std::isfinite(x)) add(id, t, field, "missing or non-finite value");
    };
    auto check_count = [&](double y, int t, const char* field) {
      if (!std::isfinite(y)) {
        add(id, t, field, "missing or non-finite value");
      } else if (rules.count_outcome && (y < 0.0 || y != std::floor(y))) {
        add(id, t, field, "must be a nonnegative integer");
      }
    };
    check_count(panel.y(u, 0), 0, "Y0");
    check_real(panel.m(u, 0), 0, "M0");
    check_real(panel.w(u, 0), 0, "W0");
    for (std::size_t j = 0; j < panel.covariates(); ++j) check_real(panel.v(u)[j], 0, panel.covariate_names()[j].c_str());
    for (int t = 1; t <= panel.periods(); ++t) {
      const int z = panel.z(u, t);
      if (z != 0 && z != 1) add(id, t, "Z", "must be 0 or 1 (got " + std::to_string(z) + ")");
      check_real(panel.w(u, t), t, "W");
      check_real(panel.m(u, t), t, "M");
      check_count(panel.y(u, t), t, "Y");
      const double off = panel.offset(u, t);
      if (!std::isfinite(off) || off <= 0.0) add(id, t, "offset", "must be positive");
    }
  }
  return rep;
}

namespace {

const std::vector<std::string> kFixedColumns = {"unit_id", "t", "Z", "W", "M", "Y", "offset", "Y0", "M0", "W0"};

double parse_or_nan(const std::string& field) {
  try {
    return csv::parse_double(field, "");
  } catch (const ValidationError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

Panel parse_panel(const std::string& text, PanelRules rules) {
  const auto table = csv::parse(text);
  std::vector<std::string> missing;
  std::map<std::string, std::size_t> col;
  for (const auto& name : kFixedColumns) {
    auto c = table.column(name);
    if (!c) missing.push_back(name);
    else col[name] = *c;
  }
  if (!missing.empty()) {
    std::string msg = "panel schema: missing column(s)";
    for (const auto& m : missing) msg += " " + m;
    msg += "; required columns are unit_id,t,Z,W,M,Y,offset,V1..Vk,Y0,M0,W0";
    throw ValidationError(msg);
  }
  std::vector<std::size_t> cov_cols;
  std::vector<std::string> cov_names;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    bool fixed = false;
    for (const auto& f : kFixedColumns) fixed = fixed || table.header[i] == f;
    if (!fixed) {
      cov_cols.push_back(i);
      cov_names.push_back(table.header[i]);
    }
  }

  ValidationReport rep;
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::size_t>> rows_of;
  int periods = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      rep.violations.push_back({row.empty() ? "?" : row[0], 0, "row", "row " + std::to_string(r + 2) + " has " +
                                std::to_string(row.size()) + " fields, expected " +
                                std::to_string(table.header.size())});
      continue;
    }
    const auto& id = row[col["unit_id"]];
    if (!rows_of.count(id)) order.push_back(id);
    rows_of[id].push_back(r);
    const double t = parse_or_nan(row[col["t"]]);
    if (std::isfinite(t) && t >= 1 && t == std::floor(t)) periods = std::max(periods, static_cast<int>(t));
  }
  if (!rep.ok()) throw PanelValidationError(rep);
  if (order.empty() || periods < 1) throw ValidationError("panel: no data rows with a valid t >= 1");

  Panel panel(order.size(), periods, cov_names);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t u = 0; u < order.size(); ++u) {
    const auto& id = order[u];
    panel.unit_id(u) = id;
    std::vector<bool> have(periods + 1, false);
    bool first = true;
    for (int t = 1; t <= periods; ++t) {
      panel.w(u, t) = nan;
      panel.m(u, t) = nan;
      panel.y(u, t) = nan;
      panel.offset(u, t) = nan;
      panel.z(u, t) = -1;
    }
    for (std::size_t r : rows_of[id]) {
      const auto& row = table.rows[r];
      const double tv = parse_or_nan(row[col["t"]]);
      if (!(std::isfinite(tv) && tv >= 1 && tv == std::floor(tv))) {
        rep.violations.push_back({id, 0, "t", "invalid time index '" + row[col["t"]] + "'"});
        continue;
      }
      const int t = static_cast<int>(tv);
      if (have[t]) {
        rep.violations.push_back({id, t, "t", "duplicate row for this time point"});
        continue;
      }
      have[t] = true;
      const double z = parse_or_nan(row[col["Z"]]);
      panel.z(u, t) = std::isfinite(z) && z == std::floor(z) ? static_cast<int>(z) : -1;
      if (panel.z(u, t) == -1 && !(std::isfinite(z) && z == -1.0))
        rep.violations.push_back({id, t, "Z", "cannot parse '" + row[col["Z"]] + "'"});
      panel.w(u, t) = parse_or_nan(row[col["W"]]);
      panel.m(u, t) = parse_or_nan(row[col["M"]]);
      panel.y(u, t) = parse_or_nan(row[col["Y"]]);
      panel.offset(u, t) = parse_or_nan(row[col["offset"]]);
      const double y0 = parse_or_nan(row[col["Y0"]]);
      const double m0 = parse_or_nan(row[col["M0"]]);
      const double w0 = parse_or_nan(row[col["W0"]]);
      if (first) {
        panel.y(u, 0) = y0;
        panel.m(u, 0) = m0;
        panel.w(u, 0) = w0;
        for (std::size_t j = 0; j < cov_cols.size(); ++j) panel.v(u, j) = parse_or_nan(row[cov_cols[j]]);
        first = false;
      } else {
        auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
        if (!same(y0, panel.y(u, 0))) rep.violations.push_back({id, t, "Y0", "baseline value differs across rows"});
        if (!same(m0, panel.m(u, 0))) rep.violations.push_back({id, t, "M0", "baseline value differs across rows"});
        if (!same(w0, panel.w(u, 0))) rep.violations.push_back({id, t, "W0", "baseline value differs across rows"});
        for (std::size_t j = 0; j < cov_cols.size(); ++j)
          if (!same(parse_or_nan(row[cov_cols[j]]), panel.v(u)[j]))
            rep.violations.push_back({id, t, cov_names[j], "baseline covariate differs across rows"});
      }
    }
    for (int t = 1; t <= periods; ++t)
      if (!have[t]) rep.violations.push_back({id, t, "t", "missing row (series length differs from T=" + std::to_string(periods) + ")"});
  }
  // Rows that failed to parse are already reported; report missing cells only
  // for rows that exist.
  auto rest = validate_panel(panel, rules);
  for (auto& v : rest.violations) {
    bool dup = false;
    for (const auto& e : rep.violations) dup = dup || (e.unit == v.unit && e.t == v.t && e.field == v.field);
    if (!dup) rep.violations.push_back(std::move(v));
  }
  if (!rep.ok()) throw PanelValidationError(rep);
  return panel;
}

Panel load_panel(const std::string& path, PanelRules rules) {
  std::ifstream in(path);
  if (!in) throw ValidationError("panel: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_panel(ss.str(), rules);
}

std::string format_panel(const Panel& panel) {
  csv::Table t;
  t.header = {"unit_id", "t", "Z", "W", "M", "Y", "offset"};
  for (const auto& n : panel.covariate_names()) t.header.push_back(n);
  t.header.insert(t.header.end(), {"Y0", "M0", "W0"});
  for (std::size_t u = 0; u < panel.units(); ++u) {
    for (int s = 1; s <= panel.periods(); ++s) {
      std::vector<std::string> row = {panel.unit_id(u),
                                      std::to_string(s),
                                      std::to_string(panel.z(u, s)),
                                      csv::format_double(panel.w(u, s)),
                                      csv::format_double(panel.m(u, s)),
                                      csv::format_double(panel.y(u, s)),
                                      csv::format_double(panel.offset(u, s))};
      for (double v : panel.v(u)) row.push_back(csv::format_double(v));
      row.push_back(csv::format_double(panel.y(u, 0)));
      row.push_back(csv::format_double(panel.m(u, 0)));
      row.push_back(csv::format_double(panel.w(u, 0)));
      t.rows.push_back(std::move(row));
    }
  }
  return csv::format(t);
}

void write_panel(const std::string& path, const Panel& panel) {
  std::ofstream out(path);
  if (!out) throw ValidationError("panel: cannot write '" + path + "'");
  out << format_panel(panel);
}

}  // namespace medchain
