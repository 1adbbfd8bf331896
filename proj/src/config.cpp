#include "pstx/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pstx {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '-';
  });
}

std::vector<std::string> split_commas(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& s, int line, const std::string& key) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw ConfigError("'" + key + "': expected a number, got '" + s + "'", line);
  }
  return v;
}

}  // namespace

ConfigError::ConfigError(const std::string& what, int line)
    : std::runtime_error(line > 0 ? "config line " + std::to_string(line) + ": " + what : "config: " + what),
      line_(line) {}

Config Config::parse(std::string_view text) {
  Config cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (auto c = line.find_first_of("#;"); c != std::string::npos) line.erase(c);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", lineno);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!valid_name(section)) throw ConfigError("invalid section name '" + section + "'", lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", lineno);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!valid_name(key)) throw ConfigError("invalid key '" + key + "'", lineno);
    if (section.empty()) throw ConfigError("key '" + key + "' outside any [section]", lineno);
    if (value.empty()) throw ConfigError("key '" + key + "' has no value", lineno);
    const std::string full = section + "." + key;
    if (cfg.entries_.count(full)) {
      throw ConfigError("duplicate key '" + full + "' (first on line " + std::to_string(cfg.entries_[full].line) + ")",
                        lineno);
    }
    cfg.entries_[full] = {value, lineno};
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path, 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const Config::Entry* Config::find(const std::string& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto* e = find(key);
  return e ? e->value : fallback;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(e->value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != e->value.size()) {
    throw ConfigError("'" + key + "': expected an integer, got '" + e->value + "'", e->line);
  }
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto* e = find(key);
  return e ? to_double(e->value, e->line, key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
  if (e->value == "false" || e->value == "no" || e->value == "0") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + e->value + "'", e->line);
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const auto& item : split_commas(e->value)) {
    if (item.empty()) throw ConfigError("'" + key + "': empty list item", e->line);
    if (item.find(':') == std::string::npos) {
      out.push_back(to_double(item, e->line, key));
      continue;
    }
    std::vector<std::string> parts;
    std::istringstream in(item);
    std::string p;
    while (std::getline(in, p, ':')) parts.push_back(trim(p));
    if (parts.size() != 3) throw ConfigError("'" + key + "': range must be start:stop:step", e->line);
    const double a = to_double(parts[0], e->line, key), b = to_double(parts[1], e->line, key),
                 s = to_double(parts[2], e->line, key);
    if (!(s > 0) || b < a) throw ConfigError("'" + key + "': range needs step > 0 and stop >= start", e->line);
    const long long n = static_cast<long long>(std::floor((b - a) / s + 1e-9));
    if (n > 100000) throw ConfigError("'" + key + "': range too long", e->line);
    for (long long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * s);
  }
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key, const std::vector<std::string>& fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  auto out = split_commas(e->value);
  for (const auto& s : out)
    if (s.empty()) throw ConfigError("'" + key + "': empty list item", e->line);
  return out;
}

void Config::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, entry] : entries_) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "'", entry.line);
    }
  }
}

}  // namespace pstx
