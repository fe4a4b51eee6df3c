#pragma once

#include <cstdio>
#include <string>

namespace rsplan {

/// Shortest round-trip decimal form of a double; keeps CSV output
/// byte-reproducible and loss-free.
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace rsplan
