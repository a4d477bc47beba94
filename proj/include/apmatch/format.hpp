#pragma once

#include <charconv>
#include <string>

namespace apm {

/// Shortest round-trip decimal form of a double ("0.5", "1e-06", "3").
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace apm
