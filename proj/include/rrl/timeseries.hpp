#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace rrl::timeseries {

using Timestamp = std::int64_t;  // seconds since the Unix epoch, UTC

// Validated price bars. Construction enforces: equal lengths, at least two
// bars, strictly increasing timestamps, finite positive prices. Spacing that
// deviates from the bar interval marks the series irregular; it is not an error.
class PriceSeries {
 public:
  PriceSeries(std::vector<Timestamp> timestamps, std::vector<double> prices);

  std::span<const Timestamp> timestamps() const { return timestamps_; }
  std::span<const double> prices() const { return prices_; }
  std::size_t size() const { return prices_.size(); }
  std::int64_t bar_interval() const { return bar_interval_; }
  bool irregular() const { return irregular_; }

  // Contiguous sub-range [first, first + count).
  PriceSeries slice(std::size_t first, std::size_t count) const;

 private:
  std::vector<Timestamp> timestamps_;
  std::vector<double> prices_;
  std::int64_t bar_interval_ = 0;
  bool irregular_ = false;
};

struct ReturnSeries {
  std::vector<double> returns;          // returns[i] = p[i+1] - p[i]
  std::vector<Timestamp> timestamps;    // timestamp of the later bar
};

struct Standardizer {
  double mean = 0.0;
  double sd = 1.0;

  static Standardizer identity() { return {}; }
  double apply(double v) const { return (v - mean) / sd; }
};

struct FeatureWindow {
  std::vector<double> values;  // oldest first; values.back() is the return at t
};

struct CsvSchema {
  std::string timestamp_column = "timestamp";
  std::string price_column = "price";
  // Used when the file has no header row.
  std::size_t timestamp_index = 0;
  std::size_t price_index = 1;
};

PriceSeries load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
PriceSeries parse_csv(std::istream& in, const CsvSchema& schema = {});
void write_csv(std::ostream& out, const PriceSeries& series);

// Accepts integer epoch seconds or "YYYY-MM-DD HH:MM" (UTC). Throws ParseError.
Timestamp parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp t);

ReturnSeries returns_from_prices(const PriceSeries& p);
ReturnSeries returns_from_prices(std::span<const double> prices);

FeatureWindow window_at(std::span<const double> returns, std::size_t t, std::size_t m,
                        const Standardizer& norm);

// Population moments over returns[first, last). sd is clamped to 1 below 1e-12.
Standardizer fit_standardizer(std::span<const double> returns, std::size_t first, std::size_t last);

// All windows ending at t = m-1 ... returns.size()-1.
std::vector<FeatureWindow> all_windows(std::span<const double> returns, std::size_t m,
                                       const Standardizer& norm);

}  // namespace rrl::timeseries
