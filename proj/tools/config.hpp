#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace memscope::cli {

/// Key-value run configuration with [section] headers. Keys are addressed as
/// "section.key". Every value read through a getter, default or not, is
/// remembered so the effective configuration can be echoed back.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& name = "<config>");
  static Config load(const std::filesystem::path& path);

  /// Later assignments win; used for flag overrides.
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& def);
  std::optional<std::string> opt_str(const std::string& key);
  double num(const std::string& key, double def);
  std::uint64_t u64(const std::string& key, std::uint64_t def);
  std::optional<std::uint64_t> opt_u64(const std::string& key);
  bool flag(const std::string& key, bool def);
  /// Byte counts with optional KiB/MiB/GiB (or K/M/G) suffix.
  std::uint64_t bytes(const std::string& key, std::uint64_t def);
  std::vector<std::string> list(const std::string& key, const std::vector<std::string>& def);

  /// Section names below `prefix.`, e.g. level names under "level".
  std::vector<std::string> subsections(const std::string& prefix) const;

  /// Throws ConfigError naming keys that were never read but share a
  /// top-level section with keys that were.
  void reject_unknown() const;

  /// Effective configuration in the input syntax, sorted by section and key.
  std::string echo() const;

 private:
  std::optional<std::string> take(const std::string& key);
  void record(const std::string& key, const std::string& value) { used_[key] = value; }

  std::string name_;
  std::map<std::string, std::string> values_;
  std::map<std::string, std::string> used_;
};

std::uint64_t parse_bytes(const std::string& text);
std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);

}  // namespace memscope::cli
