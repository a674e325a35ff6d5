#include "annpricer/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "annpricer/errors.hpp"

namespace annp {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::check_key(const std::string& key) const {
  if (!allowed_.count(key)) throw ConfigError("unknown configuration key '" + key + "'");
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  check_key(key);
  values_[key] = value;
}

void RunConfig::set_default(const std::string& key, const std::string& value) {
  check_key(key);
  values_.emplace(key, value);
}

std::string RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing required configuration key '" + key + "'");
  return it->second;
}

std::string RunConfig::get_or(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double RunConfig::get_double(const std::string& key) const {
  const auto s = get(key);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("key '" + key + "' is not a number: " + s);
  return v;
}

long long RunConfig::get_int(const std::string& key) const {
  const auto s = get(key);
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError("key '" + key + "' is not an integer: " + s);
  return v;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  const auto s = get(key);
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ConfigError("key '" + key + "' is not a non-negative integer: " + s);
  }
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto s = get(key);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("key '" + key + "' is not a boolean: " + s);
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  const auto s = get(key);
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    double v = 0.0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size() || item.empty()) {
      throw ConfigError("key '" + key + "' has a non-numeric list entry: " + item);
    }
    out.push_back(v);
  }
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& [k, v] : values_) out << k << '=' << v << '\n';
}

}  // namespace annp
