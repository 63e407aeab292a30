#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rrl/objectives.hpp"
#include "rrl/text.hpp"
#include "rrl/timeseries.hpp"

namespace rrl::agent {

using objectives::CostModel;
using objectives::ObjectiveSpec;
using timeseries::FeatureWindow;

// F_t = tanh(w . x_t + b + u F_{t-1})
struct TraderParams {
  std::vector<double> w;
  double b = 0.0;
  double u = 0.0;
  bool b_trainable = true;

  std::size_t m() const { return w.size(); }
  bool operator==(const TraderParams&) const = default;
};

// Weights uniform in +-1/sqrt(m+2), u = 0, b fixed to b_value.
TraderParams init_trader(std::size_t m, std::uint64_t seed, double b_value, bool b_trainable);

struct PositionTrace {
  std::vector<double> positions;        // F_0 .. F_T, F_0 = 0
  std::vector<double> pre_activations;  // a_1 .. a_T

  std::size_t periods() const { return pre_activations.size(); }
};

// initial_position is F_0; 0 except when carrying state across evaluation blocks.
PositionTrace forward(const TraderParams& params, std::span<const FeatureWindow> windows,
                      double initial_position = 0.0);

struct RewardPartial {
  double d_current = 0.0;   // dR_t / dF_t
  double d_previous = 0.0;  // dR_t / dF_{t-1}
};

// sign(0) = 0 at the cost kink.
std::vector<RewardPartial> reward_partials(const PositionTrace& trace, std::span<const double> returns,
                                           const CostModel& cm);

// Gradient in the same shape as the parameters.
struct TraderGradient {
  std::vector<double> w;
  double b = 0.0;
  double u = 0.0;

  double norm() const;
};

struct BatchGradient {
  double objective = 0.0;
  TraderGradient gradient;
  PositionTrace trace;
  std::vector<double> rewards;
};

// Exact total derivative of S_T (or D_T) over the whole window. windows[t] is
// the input at period t+1 and returns[t] the return realised over it.
BatchGradient batch_gradient(const TraderParams& params, std::span<const FeatureWindow> windows,
                             std::span<const double> returns, const CostModel& cm, const ObjectiveSpec& spec);

// theta <- theta (1 - nu) + rho grad for w and u; b moves only when trainable.
TraderParams apply_update(const TraderParams& params, const TraderGradient& grad, double rho, double nu);

// Running state of the recurrent gradient for one-period updates.
struct OnlineState {
  std::vector<double> d_prev;  // dF_{t-1}/d(w, b, u), length m + 2
  double prev_position = 0.0;
  double reward_sum = 0.0;
  double reward_sq_sum = 0.0;
  double downside_sq_sum = 0.0;
  std::size_t count = 0;

  static OnlineState zeros(std::size_t m);
};

struct OnlineStep {
  TraderParams params;
  double position = 0.0;
  double reward = 0.0;
};

// Applies only the most recent R_t term of the batch gradient sum, using the
// running moments of the rewards seen so far. While the running objective is
// degenerate (fewer than two distinct rewards, or no downside) the step is zero.
OnlineStep online_gradient_step(const TraderParams& params, const FeatureWindow& window, double ret,
                                OnlineState& state, const CostModel& cm, const ObjectiveSpec& spec, double rho,
                                double nu = 0.0, double clip_norm = 0.0);

// Scales grad in place so its Euclidean norm does not exceed clip_norm (> 0).
void clip_gradient(TraderGradient& grad, double clip_norm);

// Flat snapshot: m, w.<i>, b, u, b_trainable, seed.
text::KeyValues to_snapshot(const TraderParams& params, std::uint64_t seed, std::string_view prefix = "");
TraderParams from_snapshot(const text::KeyValues& kv, std::string_view prefix = "");

// Discretized state for statistics only: +1 if F > delta, -1 if F < -delta, else 0.
int discretize(double position, double delta = 0.2);

}  // namespace rrl::agent
