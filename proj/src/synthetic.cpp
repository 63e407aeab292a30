#include <algorithm>
#include <cmath>
#include <numbers>

#include "rrl/backtest.hpp"
#include "rrl/error.hpp"
#include "rrl/random.hpp"

namespace rrl::backtest {

namespace {

PriceSeries with_clock(std::vector<double> prices) {
  std::vector<Timestamp> ts(prices.size());
  for (std::size_t k = 0; k < ts.size(); ++k) ts[k] = kSyntheticStart + static_cast<Timestamp>(k) * kSyntheticInterval;
  return PriceSeries(std::move(ts), std::move(prices));
}

// Keeps additive random walks strictly positive.
double floor_price(double p) { return std::max(p, 0.01); }

}  // namespace

PriceSeries sine_market(std::size_t bars, std::uint64_t seed, double period, double amplitude, double level,
                        double noise_sd) {
  if (!(amplitude < level)) throw Error(ErrorCode::InvalidConfig, "sine amplitude must stay below the price level");
  Rng rng(seed);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> p(bars);
  for (std::size_t k = 0; k < bars; ++k) {
    const double noise = noise_sd > 0.0 ? noise_sd * rng.normal() : 0.0;
    p[k] = floor_price(level + amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(k) / period + phase) + noise);
  }
  return with_clock(std::move(p));
}

PriceSeries trend_market(std::size_t bars, std::uint64_t seed, double drift, double noise_sd, double mean_regime,
                         double level) {
  Rng rng(seed);
  double direction = rng.canonical() < 0.5 ? -1.0 : 1.0;
  const double flip = 1.0 / std::max(mean_regime, 1.0);
  std::vector<double> p(bars);
  double price = level;
  for (std::size_t k = 0; k < bars; ++k) {
    if (k > 0) {
      if (rng.canonical() < flip) direction = -direction;
      price = floor_price(price + direction * drift + noise_sd * rng.normal());
    }
    p[k] = price;
  }
  return with_clock(std::move(p));
}

PriceSeries jump_market(std::size_t bars, std::uint64_t seed, double drift, double noise_sd, double jump_rate,
                        double jump_size, double level) {
  Rng rng(seed);
  std::vector<double> p(bars);
  double price = level;
  double vol_boost = 0.0;  // extra volatility multiple, decays after a jump
  for (std::size_t k = 0; k < bars; ++k) {
    if (k > 0) {
      double step = drift + noise_sd * (1.0 + vol_boost) * rng.normal();
      if (rng.canonical() < jump_rate) {
        step -= jump_size * rng.uniform(0.5, 1.5);
        vol_boost = 3.0;
      }
      vol_boost *= 0.95;
      price = floor_price(price + step);
    }
    p[k] = price;
  }
  return with_clock(std::move(p));
}

}  // namespace rrl::backtest
