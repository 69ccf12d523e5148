#include "thinfb/format.hpp"

#include <cstdio>

namespace thinfb {

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace thinfb
