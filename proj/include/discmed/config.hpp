#pragma once

// Flat "key = value" configuration files. '#' starts a comment; dotted keys
// group settings (ddpm.steps = 50). Unknown keys are rejected at use.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace discmed {

/// Malformed configuration or command line. The CLI maps this to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace detail

class Config {
 public:
  static Config parse(std::istream& in, const std::string& origin = "config") {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw UsageError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const auto key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = detail::trim(line.substr(eq + 1));
    }
    return cfg;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UsageError("cannot open config '" + path + "'");
    return parse(f, path);
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return used_.insert(key), fallback;
    return to_double(key, get(key, ""));
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return used_.insert(key), fallback;
    const auto s = get(key, "");
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw UsageError(key + ": expected an unsigned integer, got '" + s + "'");
    return v;
  }

  int get_int(const std::string& key, int fallback) const {
    if (!has(key)) return used_.insert(key), fallback;
    const auto s = get(key, "");
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw UsageError(key + ": expected an integer, got '" + s + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return used_.insert(key), fallback;
    const auto s = get(key, "");
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw UsageError(key + ": expected a boolean, got '" + s + "'");
  }

  /// Comma-separated list of reals.
  std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return used_.insert(key), fallback;
    std::vector<double> out;
    std::stringstream ss(get(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, detail::trim(item)));
    return out;
  }

  /// Keys present in the file that nothing has asked for.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) out.push_back(k);
    return out;
  }

  void reject_unknown() const {
    const auto extra = unused_keys();
    if (extra.empty()) return;
    std::string msg = "unknown config key(s):";
    for (const auto& k : extra) msg += " " + k;
    throw UsageError(msg);
  }

 private:
  static double to_double(const std::string& key, const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError(key + ": expected a number, got '" + s + "'");
    }
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace discmed
