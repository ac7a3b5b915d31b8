#pragma once

#include <charconv>
#include <string>

namespace ppsim {

// Shortest decimal form that round-trips the exact double. Used everywhere a
// float goes into a CSV or JSON file so outputs are byte-stable.
inline std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace ppsim
