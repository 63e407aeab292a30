#include "rrl/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rrl/error.hpp"

namespace rrl::objectives {

namespace {

constexpr double kMinVariance = 1e-12;

struct Moments {
  double mean = 0.0;
  double mean_sq = 0.0;
};

Moments moments(std::span<const double> r) {
  Moments m;
  for (double v : r) {
    m.mean += v;
    m.mean_sq += v * v;
  }
  const auto n = static_cast<double>(r.size());
  m.mean /= n;
  m.mean_sq /= n;
  return m;
}

double downside_mean_sq(std::span<const double> r) {
  double acc = 0.0;
  for (double v : r) {
    const double d = std::min(v, 0.0);
    acc += d * d;
  }
  return acc / static_cast<double>(r.size());
}

void require_length(std::span<const double> r, std::size_t n, const char* what) {
  if (r.size() < n) {
    throw Error(ErrorCode::TooShort, std::string(what) + " needs at least " + std::to_string(n) + " rewards");
  }
}

}  // namespace

void CostModel::validate() const {
  if (!(shares > 0.0) || !(cost >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "cost model requires s > 0 and c >= 0");
  }
}

void ObjectiveSpec::validate() const {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "objective epsilon must be positive");
}

std::string_view to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::Sharpe ? "sharpe" : "ddr";
}

ObjectiveKind objective_kind_from_string(std::string_view text) {
  if (text == "sharpe") return ObjectiveKind::Sharpe;
  if (text == "ddr") return ObjectiveKind::DownsideDeviation;
  throw Error(ErrorCode::InvalidConfig, "unknown objective '" + std::string(text) + "'");
}

std::vector<double> trading_returns(std::span<const double> positions, std::span<const double> returns,
                                    const CostModel& cm) {
  if (positions.size() != returns.size() + 1) {
    throw Error(ErrorCode::LengthMismatch, "positions must have one more entry than returns");
  }
  std::vector<double> out(returns.size());
  for (std::size_t t = 1; t < positions.size(); ++t) {
    out[t - 1] = cm.shares * (positions[t - 1] * returns[t - 1] - cm.cost * std::abs(positions[t] - positions[t - 1]));
  }
  return out;
}

double sharpe_ratio(std::span<const double> rewards) {
  require_length(rewards, 2, "Sharpe ratio");
  const auto m = moments(rewards);
  const double var = m.mean_sq - m.mean * m.mean;
  if (var < kMinVariance) throw Error(ErrorCode::DegenerateVariance, "rewards have zero variance");
  return m.mean / std::sqrt(var);
}

std::vector<double> sharpe_gradient(std::span<const double> rewards) {
  require_length(rewards, 2, "Sharpe gradient");
  const auto m = moments(rewards);
  const double var = m.mean_sq - m.mean * m.mean;
  if (var < kMinVariance) throw Error(ErrorCode::DegenerateVariance, "rewards have zero variance");
  // dS/dR_t = (B - A R_t) / (T (B - A^2)^{3/2})
  const double scale = 1.0 / (static_cast<double>(rewards.size()) * var * std::sqrt(var));
  std::vector<double> g(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) g[t] = (m.mean_sq - m.mean * rewards[t]) * scale;
  return g;
}

DdrValue ddr(std::span<const double> rewards, const ObjectiveSpec& spec) {
  require_length(rewards, 1, "downside deviation ratio");
  const auto m = moments(rewards);
  const double dd = std::sqrt(downside_mean_sq(rewards));
  if (dd < spec.epsilon) return {m.mean / spec.epsilon, true};
  return {m.mean / dd, false};
}

std::vector<double> ddr_gradient(std::span<const double> rewards, const ObjectiveSpec& spec) {
  require_length(rewards, 1, "downside deviation gradient");
  const auto m = moments(rewards);
  const double q = downside_mean_sq(rewards);
  const double dd = std::sqrt(q);
  const auto n = static_cast<double>(rewards.size());
  if (dd < spec.epsilon) {
    if (!spec.floor_gradient) throw Error(ErrorCode::DegenerateDownside, "rewards have no downside");
    return std::vector<double>(rewards.size(), 1.0 / (n * spec.epsilon));
  }
  // D = A / sqrt(Q); dA/dR_t = 1/T, dQ/dR_t = 2 min(R_t, 0) / T
  std::vector<double> g(rewards.size());
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    const double down = rewards[t] < 0.0 ? rewards[t] : 0.0;
    g[t] = 1.0 / (n * dd) - m.mean * down / (n * q * dd);
  }
  return g;
}

double objective_value(std::span<const double> rewards, const ObjectiveSpec& spec) {
  if (spec.kind == ObjectiveKind::Sharpe) return sharpe_ratio(rewards);
  return ddr(rewards, spec).value;
}

std::vector<double> objective_gradient(std::span<const double> rewards, const ObjectiveSpec& spec) {
  if (spec.kind == ObjectiveKind::Sharpe) return sharpe_gradient(rewards);
  return ddr_gradient(rewards, spec);
}

std::vector<double> equity_curve(std::span<const double> rewards) {
  std::vector<double> eq(rewards.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    acc += rewards[t];
    eq[t] = acc;
  }
  return eq;
}

double max_drawdown(std::span<const double> equity) {
  double peak = equity.empty() ? 0.0 : equity.front();
  double worst = 0.0;
  for (double v : equity) {
    peak = std::max(peak, v);
    worst = std::max(worst, peak - v);
  }
  return worst;
}

}  // namespace rrl::objectives
