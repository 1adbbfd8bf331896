#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pstx {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line);
  /// 1-based source line, 0 when not tied to a line.
  int line() const { return line_; }

 private:
  int line_;
};

/// INI-style key/value file: `[section]` headers, `key = value` lines,
/// `#` or `;` comments. Keys are addressed as "section.key".
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated values and/or inclusive ranges `start:stop:step`.
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> get_strings(const std::string& key, const std::vector<std::string>& fallback) const;

  /// Throws on any key outside `allowed`, reporting its line.
  void require_known(const std::vector<std::string>& allowed) const;
  void set(const std::string& key, const std::string& value) { entries_[key] = {value, 0}; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  const Entry* find(const std::string& key) const;
  std::map<std::string, Entry> entries_;
};

}  // namespace pstx
