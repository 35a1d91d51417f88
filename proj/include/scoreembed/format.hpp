#pragma once

#include <string>
#include <string_view>

namespace scoreembed {

// 17 significant digits; reads back to the same double.
std::string format_double(double v);
// Strict parse: the whole string must be consumed. Throws DataError.
double parse_double(std::string_view s);

}  // namespace scoreembed
