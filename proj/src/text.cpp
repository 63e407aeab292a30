#include "rrl/text.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>

#include "rrl/error.hpp"

namespace rrl::text {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, std::string_view what) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw Error(ErrorCode::ParseError, "malformed number '" + std::string(s) + "' for " + std::string(what));
  }
  return v;
}

std::int64_t parse_int(std::string_view s, std::string_view what) {
  s = trim(s);
  std::int64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) {
    throw Error(ErrorCode::ParseError, "malformed integer '" + std::string(s) + "' for " + std::string(what));
  }
  return v;
}

bool parse_bool(std::string_view s, std::string_view what) {
  s = trim(s);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorCode::ParseError, "malformed boolean '" + std::string(s) + "' for " + std::string(what));
}

void KeyValues::set(std::string key, std::string value) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
  if (it != entries_.end()) {
    it->second = std::move(value);
  } else {
    entries_.emplace_back(std::move(key), std::move(value));
  }
}

bool KeyValues::contains(std::string_view key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& KeyValues::get(std::string_view key) const {
  for (const auto& e : entries_) {
    if (e.first == key) return e.second;
  }
  throw Error(ErrorCode::InvalidConfig, "missing key '" + std::string(key) + "'");
}

std::string KeyValues::get_or(std::string_view key, std::string fallback) const {
  return contains(key) ? get(key) : fallback;
}

double KeyValues::get_double(std::string_view key) const { return parse_double(get(key), key); }

double KeyValues::get_double_or(std::string_view key, double fallback) const {
  return contains(key) ? parse_double(get(key), key) : fallback;
}

std::int64_t KeyValues::get_int_or(std::string_view key, std::int64_t fallback) const {
  return contains(key) ? parse_int(get(key), key) : fallback;
}

bool KeyValues::get_bool_or(std::string_view key, bool fallback) const {
  return contains(key) ? parse_bool(get(key), key) : fallback;
}

void KeyValues::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
}

namespace {

KeyValues parse_impl(std::istream& in, bool sections) {
  KeyValues kv;
  std::string prefix;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#' || s.front() == ';') continue;
    if (sections && s.front() == '[') {
      if (s.back() != ']') {
        throw Error(ErrorCode::ParseError, "unterminated section header at line " + std::to_string(line_no));
      }
      prefix = std::string(trim(s.substr(1, s.size() - 2)));
      if (!prefix.empty()) prefix += '.';
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::ParseError, "expected key=value at line " + std::to_string(line_no));
    }
    kv.set(prefix + std::string(trim(s.substr(0, eq))), std::string(trim(s.substr(eq + 1))));
  }
  return kv;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) { return parse_impl(in, false); }
KeyValues parse_sectioned(std::istream& in) { return parse_impl(in, true); }

}  // namespace rrl::text
