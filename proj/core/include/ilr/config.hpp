#pragma once

// Flat key=value run configuration. Every key has a default; files and flag
// overrides may only set known keys.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ilr/checkpoint.hpp"

namespace ilr {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

const std::vector<ConfigKey>& config_keys();

class RunConfig {
 public:
  RunConfig();  // all defaults

  // Lines of key=value; '#' starts a comment; blank lines ignored.
  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text, const std::string& origin = "config");

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;  // comma separated
  std::vector<std::size_t> get_size_list(const std::string& key) const;

  const KeyValues& values() const { return values_; }
  std::string serialize() const;
  // FNV-1a of serialize(), as 16 hex digits.
  std::string hash() const;

 private:
  KeyValues values_;
};

}  // namespace ilr
