#ifndef INTLAB_UTIL_HPP
#define INTLAB_UTIL_HPP

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace intlab {

/// printf-style double formatting into a std::string ("%.17g" round-trips exactly).
inline std::string format_double(double v, const char* fmt = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

/// Split on a single separator; empty fields are kept ("a;;b" -> 3 fields).
inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(s.substr(pos));
      return out;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
}

/// Strict decimal parse of a small unsigned field: digits only, no sign, no
/// whitespace. Values above `cap` report cap+1 so callers can range-check
/// without overflow. Returns false on any non-digit or empty input.
inline bool parse_small_uint(std::string_view s, unsigned cap, unsigned& out) {
  if (s.empty()) return false;
  unsigned v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<unsigned>(c - '0');
    if (v > cap) v = cap + 1;  // saturate, keep scanning for digit validity
  }
  out = v;
  return true;
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace intlab

#endif
