#pragma once

#include <charconv>
#include <string>

namespace hdvplan {

/// Shortest round-trip decimal text for a double ("nan"/"inf" spelled out).
inline std::string fmt_num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

}  // namespace hdvplan
