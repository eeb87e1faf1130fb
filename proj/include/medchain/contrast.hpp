#ifndef MEDCHAIN_CONTRAST_HPP
#define MEDCHAIN_CONTRAST_HPP

#include <string>
#include <vector>

namespace medchain {

/// Treated history z and reference history z' of equal length t, differing
/// only at the final index.
struct Contrast {
  std::vector<int> treated;
  std::vector<int> reference;

  int t() const { return static_cast<int>(treated.size()); }
  /// Parses "0001v0000".
  static Contrast parse(const std::string& text);
  /// (0,...,0,1) vs (0,...,0,0) of length t.
  static Contrast final_switch(int t);
  std::string to_string() const;
  void validate() const;
};

}  // namespace medchain

#endif
