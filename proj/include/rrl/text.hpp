#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Number formatting and the flat key=value text used by snapshots, configs
// and reports.
namespace rrl::text {

// Shortest representation that round-trips exactly.
std::string format_double(double v);
double parse_double(std::string_view s, std::string_view what);
std::int64_t parse_int(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);
std::string_view trim(std::string_view s);

// Ordered key/value pairs; duplicate keys keep the last value.
class KeyValues {
 public:
  void set(std::string key, std::string value);
  void set(std::string key, double value) { set(std::move(key), format_double(value)); }

  bool contains(std::string_view key) const;
  const std::string& get(std::string_view key) const;  // throws InvalidConfig when missing
  std::string get_or(std::string_view key, std::string fallback) const;
  double get_double(std::string_view key) const;
  double get_double_or(std::string_view key, double fallback) const;
  std::int64_t get_int_or(std::string_view key, std::int64_t fallback) const;
  bool get_bool_or(std::string_view key, bool fallback) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  void write(std::ostream& out) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Parses "key=value" lines; blank lines and lines starting with '#' are skipped.
KeyValues parse_key_values(std::istream& in);

// Sectioned variant: "[section]" headers prefix subsequent keys as
// "section.key". Keys before any header have no prefix.
KeyValues parse_sectioned(std::istream& in);

}  // namespace rrl::text
