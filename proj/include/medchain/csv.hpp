#ifndef MEDCHAIN_CSV_HPP
#define MEDCHAIN_CSV_HPP

#include <optional>
#include <string>
#include <vector>

namespace medchain::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index, or nullopt when absent.
  std::optional<std::size_t> column(const std::string& name) const;
};

/// Reads a comma-separated file with a header line. Double-quoted fields
/// (with "" escapes) are supported; blank lines are skipped.
Table read(const std::string& path);
Table parse(const std::string& text);

void write(const std::string& path, const Table& table);
std::string format(const Table& table);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

/// Strict numeric parse of a full field; throws ValidationError naming `context`.
double parse_double(const std::string& field, const std::string& context);
long parse_long(const std::string& field, const std::string& context);

}  // namespace medchain::csv

#endif
