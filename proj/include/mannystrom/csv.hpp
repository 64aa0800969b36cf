#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "mannystrom/errors.hpp"

namespace mannystrom {
namespace io {

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

template <class T>
std::string csv_field(const T& v) {
  if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    return std::string(v);
  }
}

/// Comma-separated writer with deterministic numeric formatting.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path)
      : out_(path, std::ios::binary) {
    if (!out_) throw InvalidInput("csv: cannot open '" + path + "'");
  }

  template <class... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, out_ << csv_field(fields)),
     ...);
    out_ << '\n';
  }

  void header(const std::vector<std::string>& names) {
    for (std::size_t i = 0; i < names.size(); ++i)
      out_ << (i ? "," : "") << names[i];
    out_ << '\n';
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

}  // namespace io
}  // namespace mannystrom
