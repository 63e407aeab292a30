#include "rrl/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "rrl/error.hpp"

namespace rrl::timeseries {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view text, double& out) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc{} && ptr == end;
}

std::string at_line(std::size_t line) { return " at line " + std::to_string(line); }

}  // namespace

PriceSeries::PriceSeries(std::vector<Timestamp> timestamps, std::vector<double> prices)
    : timestamps_(std::move(timestamps)), prices_(std::move(prices)) {
  if (timestamps_.size() != prices_.size()) {
    throw Error(ErrorCode::LengthMismatch, "timestamps and prices differ in length");
  }
  if (prices_.size() < 2) {
    throw Error(ErrorCode::TooShort, "a price series needs at least two bars");
  }
  for (std::size_t i = 0; i < prices_.size(); ++i) {
    if (!std::isfinite(prices_[i]) || prices_[i] <= 0.0) {
      throw Error(ErrorCode::NonPositivePrice, "price at index " + std::to_string(i) + " is not a finite positive value");
    }
    if (i > 0 && timestamps_[i] <= timestamps_[i - 1]) {
      throw Error(ErrorCode::NonMonotoneTime, "timestamp at index " + std::to_string(i) + " does not increase");
    }
  }
  bar_interval_ = timestamps_[1] - timestamps_[0];
  for (std::size_t i = 2; i < timestamps_.size(); ++i) {
    if (timestamps_[i] - timestamps_[i - 1] != bar_interval_) {
      irregular_ = true;
      break;
    }
  }
}

PriceSeries PriceSeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) {
    throw Error(ErrorCode::IndexOutOfRange, "slice exceeds series length");
  }
  return PriceSeries({timestamps_.begin() + static_cast<std::ptrdiff_t>(first),
                      timestamps_.begin() + static_cast<std::ptrdiff_t>(first + count)},
                     {prices_.begin() + static_cast<std::ptrdiff_t>(first),
                      prices_.begin() + static_cast<std::ptrdiff_t>(first + count)});
}

Timestamp parse_timestamp(std::string_view text) {
  text = trim(text);
  Timestamp epoch = 0;
  if (parse_int(text, epoch)) return epoch;

  // YYYY-MM-DD HH:MM[:SS], 'T' accepted as the separator.
  int y = 0;
  unsigned mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
  const bool shape_ok = text.size() >= 16 && text[4] == '-' && text[7] == '-' &&
                        (text[10] == ' ' || text[10] == 'T') && text[13] == ':' &&
                        (text.size() == 16 || (text.size() == 19 && text[16] == ':'));
  if (!shape_ok || !parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d) || !parse_int(text.substr(11, 2), hh) ||
      !parse_int(text.substr(14, 2), mm) || (text.size() == 19 && !parse_int(text.substr(17, 2), ss))) {
    throw Error(ErrorCode::ParseError, "unrecognized timestamp '" + std::string(text) + "'");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) {
    throw Error(ErrorCode::ParseError, "invalid calendar timestamp '" + std::string(text) + "'");
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  auto days = t / 86400;
  auto rem = t % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02lld:%02lld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long long>(rem / 3600), static_cast<long long>((rem % 3600) / 60));
  return buf;
}

PriceSeries parse_csv(std::istream& in, const CsvSchema& schema) {
  std::vector<Timestamp> ts;
  std::vector<double> px;
  std::size_t ts_col = schema.timestamp_index;
  std::size_t px_col = schema.price_index;
  bool first_row = true;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto fields = split_fields(content);

    if (first_row) {
      first_row = false;
      const auto ts_it = std::find(fields.begin(), fields.end(), schema.timestamp_column);
      const auto px_it = std::find(fields.begin(), fields.end(), schema.price_column);
      if (ts_it != fields.end() && px_it != fields.end()) {
        ts_col = static_cast<std::size_t>(ts_it - fields.begin());
        px_col = static_cast<std::size_t>(px_it - fields.begin());
        continue;
      }
    }

    if (fields.size() <= std::max(ts_col, px_col)) {
      throw Error(ErrorCode::ParseError, "missing column" + at_line(line_no));
    }
    Timestamp t = 0;
    try {
      t = parse_timestamp(fields[ts_col]);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, e.what() + at_line(line_no));
    }
    double p = 0.0;
    if (!parse_double(fields[px_col], p)) {
      throw Error(ErrorCode::ParseError, "malformed price '" + std::string(fields[px_col]) + "'" + at_line(line_no));
    }
    if (!std::isfinite(p) || p <= 0.0) {
      throw Error(ErrorCode::NonPositivePrice, "non-positive price" + at_line(line_no));
    }
    if (!ts.empty() && t <= ts.back()) {
      throw Error(ErrorCode::NonMonotoneTime, "timestamp does not increase" + at_line(line_no));
    }
    ts.push_back(t);
    px.push_back(p);
  }
  return PriceSeries(std::move(ts), std::move(px));
}

PriceSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::NotFound, "cannot open price file " + path.string());
  }
  return parse_csv(in, schema);
}

void write_csv(std::ostream& out, const PriceSeries& series) {
  out << "timestamp,price\n";
  char buf[64];
  for (std::size_t i = 0; i < series.size(); ++i) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, series.prices()[i]);
    out << series.timestamps()[i] << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
  }
}

ReturnSeries returns_from_prices(std::span<const double> prices) {
  if (prices.size() < 2) {
    throw Error(ErrorCode::TooShort, "returns need at least two prices");
  }
  ReturnSeries out;
  out.returns.resize(prices.size() - 1);
  for (std::size_t i = 0; i + 1 < prices.size(); ++i) out.returns[i] = prices[i + 1] - prices[i];
  return out;
}

ReturnSeries returns_from_prices(const PriceSeries& p) {
  auto out = returns_from_prices(p.prices());
  out.timestamps.assign(p.timestamps().begin() + 1, p.timestamps().end());
  return out;
}

FeatureWindow window_at(std::span<const double> returns, std::size_t t, std::size_t m,
                        const Standardizer& norm) {
  if (m == 0 || t + 1 < m || t >= returns.size()) {
    throw Error(ErrorCode::IndexOutOfRange,
                "window of length " + std::to_string(m) + " ending at " + std::to_string(t) + " is out of range");
  }
  FeatureWindow w;
  w.values.reserve(m);
  for (std::size_t i = t + 1 - m; i <= t; ++i) w.values.push_back(norm.apply(returns[i]));
  return w;
}

Standardizer fit_standardizer(std::span<const double> returns, std::size_t first, std::size_t last) {
  if (first >= last || last > returns.size()) {
    throw Error(ErrorCode::EmptyRange, "standardizer range is empty or out of bounds");
  }
  const auto n = static_cast<double>(last - first);
  double sum = 0.0;
  for (std::size_t i = first; i < last; ++i) sum += returns[i];
  const double mean = sum / n;
  double ss = 0.0;
  for (std::size_t i = first; i < last; ++i) ss += (returns[i] - mean) * (returns[i] - mean);
  double sd = std::sqrt(ss / n);
  if (sd < 1e-12) sd = 1.0;
  return {mean, sd};
}

std::vector<FeatureWindow> all_windows(std::span<const double> returns, std::size_t m,
                                       const Standardizer& norm) {
  std::vector<FeatureWindow> out;
  if (m == 0 || returns.size() < m) return out;
  out.reserve(returns.size() - m + 1);
  for (std::size_t t = m - 1; t < returns.size(); ++t) out.push_back(window_at(returns, t, m, norm));
  return out;
}

}  // namespace rrl::timeseries
