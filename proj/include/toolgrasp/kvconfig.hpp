#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace toolgrasp {

// Plain-text `key=value` configuration. Blank lines and lines starting with
// '#' are ignored; surrounding whitespace is trimmed. Keys are kept sorted so
// serialization is canonical.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  std::string to_text() const;
  void save(const std::filesystem::path& path) const;

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);

  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double_or(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int_or(const std::string& key, long long fallback) const;
  // Comma-separated integers.
  std::vector<long long> get_int_list(const std::string& key) const;

  // Values from `overrides` replace ours.
  void merge(const KeyValueConfig& overrides);

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

// Strict numeric parsing of a whole token; throws ParseError(line).
double parse_double(const std::string& token, std::size_t line = 0);
long long parse_int(const std::string& token, std::size_t line = 0);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char sep);
std::vector<std::string> split_ws(const std::string& s);

}  // namespace toolgrasp
