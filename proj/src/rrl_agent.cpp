#include "rrl/rrl_agent.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rrl/error.hpp"
#include "rrl/random.hpp"

namespace rrl::agent {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

std::string key(std::string_view prefix, std::string_view name) { return std::string(prefix) + std::string(name); }

}  // namespace

TraderParams init_trader(std::size_t m, std::uint64_t seed, double b_value, bool b_trainable) {
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(m + 2));
  TraderParams p;
  p.w.resize(m);
  for (auto& v : p.w) v = rng.uniform(-bound, bound);
  p.b = b_value;
  p.u = 0.0;
  p.b_trainable = b_trainable;
  return p;
}

PositionTrace forward(const TraderParams& params, std::span<const FeatureWindow> windows,
                      double initial_position) {
  PositionTrace trace;
  trace.positions.reserve(windows.size() + 1);
  trace.pre_activations.reserve(windows.size());
  trace.positions.push_back(initial_position);
  for (const auto& x : windows) {
    if (x.values.size() != params.m()) {
      throw Error(ErrorCode::DimensionMismatch, "window length " + std::to_string(x.values.size()) +
                                                    " does not match trader input size " + std::to_string(params.m()));
    }
    double a = params.b + params.u * trace.positions.back();
    for (std::size_t i = 0; i < params.m(); ++i) a += params.w[i] * x.values[i];
    trace.pre_activations.push_back(a);
    trace.positions.push_back(std::tanh(a));
  }
  return trace;
}

std::vector<RewardPartial> reward_partials(const PositionTrace& trace, std::span<const double> returns,
                                           const CostModel& cm) {
  if (returns.size() != trace.periods()) {
    throw Error(ErrorCode::LengthMismatch, "returns and position trace are not aligned");
  }
  std::vector<RewardPartial> out(returns.size());
  for (std::size_t t = 0; t < returns.size(); ++t) {
    const double s = sign(trace.positions[t + 1] - trace.positions[t]);
    out[t].d_current = -cm.shares * cm.cost * s;
    out[t].d_previous = cm.shares * returns[t] + cm.shares * cm.cost * s;
  }
  return out;
}

double TraderGradient::norm() const {
  double acc = b * b + u * u;
  for (double v : w) acc += v * v;
  return std::sqrt(acc);
}

void clip_gradient(TraderGradient& grad, double clip_norm) {
  const double n = grad.norm();
  if (clip_norm > 0.0 && n > clip_norm) {
    const double k = clip_norm / n;
    for (auto& v : grad.w) v *= k;
    grad.b *= k;
    grad.u *= k;
  }
}

BatchGradient batch_gradient(const TraderParams& params, std::span<const FeatureWindow> windows,
                             std::span<const double> returns, const CostModel& cm, const ObjectiveSpec& spec) {
  if (windows.size() != returns.size()) {
    throw Error(ErrorCode::LengthMismatch, "windows and returns are not aligned");
  }
  BatchGradient out;
  out.trace = forward(params, windows);
  out.rewards = objectives::trading_returns(out.trace.positions, returns, cm);
  out.objective = objectives::objective_value(out.rewards, spec);
  const auto dS_dR = objectives::objective_gradient(out.rewards, spec);
  const auto partials = reward_partials(out.trace, returns, cm);

  // Forward-mode recursion for dF_t/dtheta, theta = (w_0..w_{m-1}, b, u).
  const std::size_t m = params.m();
  const std::size_t n = m + 2;
  std::vector<double> d_prev(n, 0.0);
  std::vector<double> d_cur(n, 0.0);
  std::vector<double> total(n, 0.0);
  for (std::size_t t = 0; t < windows.size(); ++t) {
    const double f_prev = out.trace.positions[t];
    const double f = out.trace.positions[t + 1];
    const double slope = 1.0 - f * f;
    const auto& x = windows[t].values;
    for (std::size_t i = 0; i < m; ++i) d_cur[i] = slope * (x[i] + params.u * d_prev[i]);
    d_cur[m] = slope * (1.0 + params.u * d_prev[m]);
    d_cur[m + 1] = slope * (f_prev + params.u * d_prev[m + 1]);

    const double gc = dS_dR[t] * partials[t].d_current;
    const double gp = dS_dR[t] * partials[t].d_previous;
    for (std::size_t k = 0; k < n; ++k) total[k] += gc * d_cur[k] + gp * d_prev[k];
    std::swap(d_prev, d_cur);
  }
  out.gradient.w.assign(total.begin(), total.begin() + static_cast<std::ptrdiff_t>(m));
  out.gradient.b = total[m];
  out.gradient.u = total[m + 1];
  return out;
}

TraderParams apply_update(const TraderParams& params, const TraderGradient& grad, double rho, double nu) {
  if (grad.w.size() != params.m()) {
    throw Error(ErrorCode::DimensionMismatch, "gradient and parameters differ in size");
  }
  TraderParams out = params;
  const double keep = 1.0 - nu;
  for (std::size_t i = 0; i < out.m(); ++i) out.w[i] = params.w[i] * keep + rho * grad.w[i];
  out.u = params.u * keep + rho * grad.u;
  if (params.b_trainable) out.b = params.b * keep + rho * grad.b;
  return out;
}

OnlineState OnlineState::zeros(std::size_t m) {
  OnlineState s;
  s.d_prev.assign(m + 2, 0.0);
  return s;
}

OnlineStep online_gradient_step(const TraderParams& params, const FeatureWindow& window, double ret,
                                OnlineState& state, const CostModel& cm, const ObjectiveSpec& spec, double rho,
                                double nu, double clip_norm) {
  const std::size_t m = params.m();
  if (window.values.size() != m || state.d_prev.size() != m + 2) {
    throw Error(ErrorCode::DimensionMismatch, "online step dimensions disagree");
  }
  const double f_prev = state.prev_position;
  double a = params.b + params.u * f_prev;
  for (std::size_t i = 0; i < m; ++i) a += params.w[i] * window.values[i];
  const double f = std::tanh(a);
  const double slope = 1.0 - f * f;

  std::vector<double> d_cur(m + 2);
  for (std::size_t i = 0; i < m; ++i) d_cur[i] = slope * (window.values[i] + params.u * state.d_prev[i]);
  d_cur[m] = slope * (1.0 + params.u * state.d_prev[m]);
  d_cur[m + 1] = slope * (f_prev + params.u * state.d_prev[m + 1]);

  const double reward = cm.shares * (f_prev * ret - cm.cost * std::abs(f - f_prev));
  state.reward_sum += reward;
  state.reward_sq_sum += reward * reward;
  const double down = std::min(reward, 0.0);
  state.downside_sq_sum += down * down;
  state.count += 1;

  const auto n = static_cast<double>(state.count);
  const double mean = state.reward_sum / n;
  double d_obj = 0.0;
  if (spec.kind == objectives::ObjectiveKind::Sharpe) {
    const double var = state.reward_sq_sum / n - mean * mean;
    if (var >= 1e-12) d_obj = (state.reward_sq_sum / n - mean * reward) / (n * var * std::sqrt(var));
  } else {
    const double q = state.downside_sq_sum / n;
    const double dd = std::sqrt(q);
    if (dd >= spec.epsilon) d_obj = 1.0 / (n * dd) - mean * down / (n * q * dd);
  }

  const double s = sign(f - f_prev);
  const double d_current = -cm.shares * cm.cost * s;
  const double d_previous = cm.shares * ret + cm.shares * cm.cost * s;

  TraderGradient grad;
  grad.w.resize(m);
  for (std::size_t i = 0; i < m; ++i) grad.w[i] = d_obj * (d_current * d_cur[i] + d_previous * state.d_prev[i]);
  grad.b = d_obj * (d_current * d_cur[m] + d_previous * state.d_prev[m]);
  grad.u = d_obj * (d_current * d_cur[m + 1] + d_previous * state.d_prev[m + 1]);
  clip_gradient(grad, clip_norm);

  state.d_prev = std::move(d_cur);
  state.prev_position = f;
  return {apply_update(params, grad, rho, nu), f, reward};
}

text::KeyValues to_snapshot(const TraderParams& params, std::uint64_t seed, std::string_view prefix) {
  text::KeyValues kv;
  kv.set(key(prefix, "m"), std::to_string(params.m()));
  for (std::size_t i = 0; i < params.m(); ++i) kv.set(key(prefix, "w." + std::to_string(i)), params.w[i]);
  kv.set(key(prefix, "b"), params.b);
  kv.set(key(prefix, "u"), params.u);
  kv.set(key(prefix, "b_trainable"), params.b_trainable ? "true" : "false");
  if (prefix.empty()) kv.set("seed", std::to_string(seed));
  return kv;
}

TraderParams from_snapshot(const text::KeyValues& kv, std::string_view prefix) {
  TraderParams p;
  const auto m = kv.get_int_or(key(prefix, "m"), -1);
  if (m < 0) throw Error(ErrorCode::ParseError, "snapshot lacks the input size m");
  p.w.resize(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < p.w.size(); ++i) p.w[i] = kv.get_double(key(prefix, "w." + std::to_string(i)));
  p.b = kv.get_double(key(prefix, "b"));
  p.u = kv.get_double(key(prefix, "u"));
  p.b_trainable = kv.get_bool_or(key(prefix, "b_trainable"), true);
  return p;
}

int discretize(double position, double delta) {
  if (position > delta) return 1;
  if (position < -delta) return -1;
  return 0;
}

}  // namespace rrl::agent
