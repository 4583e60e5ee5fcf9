#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefgp/errors.hpp"

namespace prefgp {

// Flat key=value run configuration. Lines are `key = value`; blank lines and
// `#` comments are ignored. One file fully determines a run.
class Config {
 public:
  static Config load(const std::string& path);
  static Config parse(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_uint64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list of reals; empty when absent.
  std::vector<double> get_double_list(const std::string& key) const;

  // Throws InvalidConfigError naming the first key not in `allowed`.
  void require_known(std::span<const std::string_view> allowed) const;

  // Stable key-sorted `key = value` text, for echoing the resolved config.
  std::string serialize() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace prefgp
