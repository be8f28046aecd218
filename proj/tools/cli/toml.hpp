#pragma once

// Parser for the configuration subset of TOML described in docs/config.md.

#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace mpflow::cli {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Tables become objects, arrays of tables become arrays of objects.
/// Throws ConfigError naming the line on a syntax error.
nlohmann::json parse_toml(const std::string& text);
nlohmann::json parse_toml_file(const std::filesystem::path& file);

}  // namespace mpflow::cli
