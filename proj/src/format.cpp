#include "scoreembed/format.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>

#include "scoreembed/error.hpp"

namespace scoreembed {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(std::string_view s) {
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size()) throw DataError("not a number: '" + tmp + "'");
  return v;
}

}  // namespace scoreembed
