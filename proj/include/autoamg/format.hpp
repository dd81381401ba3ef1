#pragma once

#include <string>
#include <string_view>

namespace autoamg {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

/// Strict full-string parse; throws Error on trailing garbage.
double parse_double(std::string_view text);

}  // namespace autoamg
