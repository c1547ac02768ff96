#ifndef MMC_CONFIG_HPP
#define MMC_CONFIG_HPP

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "mmc/types.hpp"

namespace mmc {

namespace detail {
inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}
}  // namespace detail

/// Flat key=value configuration. Keys use dotted section prefixes such as
/// "optimizer.lr" or "fusion.channels". Lines starting with '#' and blank
/// lines are ignored; later assignments override earlier ones. serialize()
/// emits keys in sorted order and round-trips losslessly through parse.
class KVConfig {
 public:
  KVConfig() = default;

  /// Merges key=value lines into this config; later assignments override.
  void parse_string(const std::string& text, const std::string& origin = "<string>") {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = detail::trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value");
      const std::string key = detail::trim(t.substr(0, eq));
      const std::string value = detail::trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      kv_[key] = value;
    }
  }

  static KVConfig parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    KVConfig cfg;
    cfg.parse_string(buf.str(), path);
    return cfg;
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  void set_int(const std::string& key, long long v) { kv_[key] = std::to_string(v); }
  void set_bool(const std::string& key, bool v) { kv_[key] = v ? "true" : "false"; }
  void set_real(const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    kv_[key] = buf;
  }

  std::string get_string(const std::string& key, const std::string& fallback = "") const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  std::string require_string(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required config key: " + key);
    return it->second;
  }

  long long get_int(const std::string& key, long long fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    return parse_int(key, it->second);
  }

  double get_real(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    return parse_real(key, it->second);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key " + key + ": expected a boolean, got '" + v + "'");
  }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
    return out.str();
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

  bool operator==(const KVConfig& other) const { return kv_ == other.kv_; }

 private:
  static long long parse_int(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const long long r = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError("config key " + key + ": expected an integer, got '" + v + "'");
    return r;
  }

  static double parse_real(const std::string& key, const std::string& v) {
    char* end = nullptr;
    const double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0')
      throw ConfigError("config key " + key + ": expected a number, got '" + v + "'");
    return r;
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace mmc

#endif  // MMC_CONFIG_HPP
