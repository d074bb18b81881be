#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tcn/common.hpp"

namespace tcn {

// Flat key=value configuration with [section] headers. Keys are addressed as
// "section.key"; values are strings until a typed getter parses them. The
// canonical serialization (sorted keys) feeds the config hash that stamps
// every output file.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text, const std::string& origin = "<string>");

  void set(const std::string& dotted_key, const std::string& value);
  bool has(const std::string& dotted_key) const;

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string get_required(const std::string& key) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;

  // Applies "section.key=value" override strings (CLI flags beat file values).
  void apply_overrides(const std::vector<std::string>& overrides);

  std::string canonical() const;
  uint64_t hash() const { return fnv1a(canonical()); }
  void write(const std::string& path) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace tcn
