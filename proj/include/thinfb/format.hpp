#pragma once

#include <string>

namespace thinfb {

/// Shortest-stable decimal form used in every emitted table: printf %.17g.
std::string format_number(double value);

}  // namespace thinfb
