#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mannystrom/errors.hpp"
#include "mannystrom/matrix_functions.hpp"

namespace mannystrom {
namespace io {

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& text, const std::string& what) {
  const char* begin = text.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ConfigError(what + ": expected a number, got '" + text + "'");
  return v;
}

inline long long parse_int(const std::string& text, const std::string& what) {
  const char* begin = text.c_str();
  char* end = nullptr;
  long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw ConfigError(what + ": expected an integer, got '" + text + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

}  // namespace detail

/// Flat key=value document with '#' comments.  Values stay strings until a
/// typed getter is called, so the echo written to metadata is verbatim.
class Config {
 public:
  Config() = default;

  static Config parse_string(const std::string& text,
                             const std::string& origin = "<config>") {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected key=value, got '" + line + "'");
      std::string key = detail::trim(line.substr(0, eq));
      std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty key");
      if (cfg.values_.count(key))
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "' (first set at line " +
                          std::to_string(cfg.lines_.at(key)) + ")");
      cfg.values_[key] = value;
      cfg.lines_[key] = lineno;
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
    lines_[key] = 0;
  }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end())
      throw ConfigError("config: missing required key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return detail::parse_double(it->second, "config key '" + key + "'");
  }

  Index get_index(const std::string& key, Index fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return static_cast<Index>(
        detail::parse_int(it->second, "config key '" + key + "'"));
  }

  std::uint64_t get_seed(const std::string& key,
                         std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    long long v = detail::parse_int(it->second, "config key '" + key + "'");
    if (v < 0)
      throw ConfigError("config key '" + key + "': seed must be nonnegative");
    return static_cast<std::uint64_t>(v);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config key '" + key +
                      "': expected true/false/1/0, got '" + v + "'");
  }

  std::vector<Index> get_index_list(const std::string& key,
                                    std::vector<Index> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<Index> out;
    for (const std::string& part : detail::split(it->second, ',')) {
      std::string t = detail::trim(part);
      if (t.empty())
        throw ConfigError("config key '" + key + "': empty list entry");
      out.push_back(static_cast<Index>(
          detail::parse_int(t, "config key '" + key + "'")));
    }
    return out;
  }

  std::vector<std::string> get_string_list(
      const std::string& key, std::vector<std::string> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<std::string> out;
    for (const std::string& part : detail::split(it->second, ',')) {
      std::string t = detail::trim(part);
      if (t.empty())
        throw ConfigError("config key '" + key + "': empty list entry");
      out.push_back(t);
    }
    return out;
  }

  /// Keys in sorted order, for deterministic echoes.
  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      (void)v;
      out.push_back(k);
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, int> lines_;
  std::string origin_;
};

}  // namespace io
}  // namespace mannystrom
