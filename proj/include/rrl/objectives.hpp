#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace rrl::objectives {

// s shares per unit position, c cost per share per unit change of position.
struct CostModel {
  double shares = 1.0;
  double cost = 0.0002;

  void validate() const;
};

enum class ObjectiveKind { Sharpe, DownsideDeviation };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::Sharpe;
  double epsilon = 1e-8;  // floor for the downside deviation
  // When set, ddr_gradient differentiates the floored ratio A / epsilon instead
  // of throwing DegenerateDownside. Training uses this to get through epochs
  // with no losing period.
  bool floor_gradient = false;

  void validate() const;
};

std::string_view to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(std::string_view text);

// R_t = s * (F_{t-1} r_t - c |F_t - F_{t-1}|), t = 1..T. positions has T+1
// entries starting with F_0.
std::vector<double> trading_returns(std::span<const double> positions, std::span<const double> returns,
                                    const CostModel& cm);

// A / sqrt(B - A^2) with population moments A = E[R], B = E[R^2].
double sharpe_ratio(std::span<const double> rewards);
std::vector<double> sharpe_gradient(std::span<const double> rewards);

struct DdrValue {
  double value = 0.0;
  bool degenerate = false;  // denominator floored at epsilon
};

// A / sqrt(E[min(R, 0)^2]).
DdrValue ddr(std::span<const double> rewards, const ObjectiveSpec& spec);
std::vector<double> ddr_gradient(std::span<const double> rewards, const ObjectiveSpec& spec);

// Dispatch on spec.kind. objective_value throws DegenerateVariance for Sharpe
// and returns the floored value for a degenerate DDR.
double objective_value(std::span<const double> rewards, const ObjectiveSpec& spec);
std::vector<double> objective_gradient(std::span<const double> rewards, const ObjectiveSpec& spec);

std::vector<double> equity_curve(std::span<const double> rewards);
double max_drawdown(std::span<const double> equity);

}  // namespace rrl::objectives
