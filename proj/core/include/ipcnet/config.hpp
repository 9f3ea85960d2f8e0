#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipcnet {

// Malformed configuration text or an out-of-range value; the message names
// the offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Flat `key = value` text. Blank lines and `#` comments are ignored; a
// repeated key keeps the last value.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "config");
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  void merge(const KeyValues& overrides);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_sizes(const std::string& key, const std::vector<std::size_t>& fallback) const;

  // Keys not in `known`, for rejecting typos.
  std::vector<std::string> unknown_keys(const std::vector<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return values_; }
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

std::string join_sizes(const std::vector<std::size_t>& values);

}  // namespace ipcnet
