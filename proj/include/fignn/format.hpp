#pragma once

#include <cstdio>
#include <string>

namespace fignn {

/// Decimal with 17 significant digits; parses back to the identical double.
inline std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace fignn
