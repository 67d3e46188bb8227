#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rtrl/train.hpp"

namespace rtrl {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Flat `key = value` text. '#' starts a comment; blank lines are ignored.
/// Precedence, lowest first: built-in defaults, file, RTRL_<KEY> environment
/// variables, explicit overrides.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  /// Reads RTRL_<UPPERCASE_KEY> for every documented key.
  void apply_env();
  void set(const std::string& key, std::string value);
  /// "key=value"
  void set_assignment(std::string_view assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// Sorted `key = value` lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Documented keys, in display order, with a one-line description each.
const std::vector<std::pair<std::string, std::string>>& config_keys();

/// Builds and validates a RunConfig. Unknown keys and malformed values throw
/// ConfigError naming the key.
RunConfig to_run_config(const Config& c);
/// Every documented key with its resolved value.
Config from_run_config(const RunConfig& rc);

}  // namespace rtrl
