#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace annp {

/// Flat key=value configuration. Lines starting with '#' and blank lines are
/// ignored. Only keys from the allowed set are accepted.
class RunConfig {
 public:
  explicit RunConfig(std::set<std::string> allowed) : allowed_(std::move(allowed)) {}

  /// Throws ConfigError on unknown keys or malformed lines.
  void load_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  void set_default(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  /// Writes every resolved key in sorted order.
  void write(const std::filesystem::path& path) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  void check_key(const std::string& key) const;

  std::set<std::string> allowed_;
  std::map<std::string, std::string> values_;
};

}  // namespace annp
