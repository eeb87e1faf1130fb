#include "medchain/contrast.hpp"

#include "medchain/common.hpp"

namespace medchain {

namespace {

std::vector<int> parse_history(const std::string& s, const std::string& text) {
  std::vector<int> h;
  for (char c : s) {
    if (c != '0' && c != '1') throw ValidationError("contrast '" + text + "': histories must be strings of 0/1");
    h.push_back(c - '0');
  }
  return h;
}

}  // namespace

Contrast Contrast::parse(const std::string& text) {
  const auto sep = text.find('v');
  if (sep == std::string::npos) throw ValidationError("contrast '" + text + "': expected the form 0001v0000");
  Contrast c{parse_history(text.substr(0, sep), text), parse_history(text.substr(sep + 1), text)};
  c.validate();
  return c;
}

Contrast Contrast::final_switch(int t) {
  if (t < 1) throw ValidationError("contrast: length must be >= 1");
  Contrast c{std::vector<int>(static_cast<std::size_t>(t), 0), std::vector<int>(static_cast<std::size_t>(t), 0)};
  c.treated.back() = 1;
  return c;
}

std::string Contrast::to_string() const {
  std::string s;
  for (int z : treated) s.push_back(static_cast<char>('0' + z));
  s.push_back('v');
  for (int z : reference) s.push_back(static_cast<char>('0' + z));
  return s;
}

void Contrast::validate() const {
  if (treated.empty() || treated.size() != reference.size())
    throw ValidationError("contrast: histories must be nonempty and of equal length");
  for (std::size_t i = 0; i < treated.size(); ++i) {
    if ((treated[i] != 0 && treated[i] != 1) || (reference[i] != 0 && reference[i] != 1))
      throw ValidationError("contrast: treatment values must be 0 or 1");
    if (i + 1 < treated.size() && treated[i] != reference[i])
      throw ValidationError("contrast " + to_string() + ": histories may differ only at the final time");
  }
}

}  // namespace medchain
