#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace hatir {

// Shortest round-trip decimal form; infinities print as inf / -inf.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace hatir
