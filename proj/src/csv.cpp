#include "medchain/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "medchain/common.hpp"

namespace medchain::csv {

std::optional<std::size_t> Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

}  // namespace

Table parse(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_line(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw ValidationError("csv: empty input (no header line)");
  return t;
}

Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("csv: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string format(const Table& table) {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out.push_back(',');
      out += quote_if_needed(fields[i]);
    }
    out.push_back('\n');
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  return out;
}

void write(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw ValidationError("csv: cannot write '" + path + "'");
  out << format(table);
  if (!out) throw ValidationError("csv: write failed for '" + path + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& field, const std::string& context) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && end[-1] == ' ') --end;
  if (begin < end && *begin == '+') ++begin;
  auto res = std::from_chars(begin, end, v);
  if (begin == end || res.ec != std::errc() || res.ptr != end)
    throw ValidationError(context + ": cannot parse '" + field + "' as a number");
  return v;
}

long parse_long(const std::string& field, const std::string& context) {
  const double v = parse_double(field, context);
  const long l = static_cast<long>(v);
  if (static_cast<double>(l) != v) throw ValidationError(context + ": '" + field + "' is not an integer");
  return l;
}

}  // namespace medchain::csv
