#include "rrl/backtest.hpp"

#include <cmath>
#include <limits>

#include "rrl/error.hpp"
#include "rrl/random.hpp"

namespace rrl::backtest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();


std::vector<double> flatten_agent(const AgentParams& p) {
  return std::visit([](const auto& v) { return optim::flatten(v); }, p);
}

AgentParams unflatten_agent(std::span<const double> x, const AgentParams& shape) {
  return std::visit([&](const auto& v) -> AgentParams { return optim::unflatten(x, v); }, shape);
}

std::size_t agent_bias_index(const AgentParams& p) {
  return std::visit([](const auto& v) { return optim::bias_index(v); }, p);
}

objectives::ObjectiveSpec training_spec(const ExperimentConfig& cfg) {
  auto spec = cfg.objective;
  spec.floor_gradient = true;
  return spec;
}

lstm::DropoutSpec train_dropout(const ExperimentConfig& cfg) {
  return {cfg.dropout, derive_seed(cfg.seed, "dropout"), lstm::DropoutMode::Train};
}

// Objective of the agent on a decision sequence, evaluated without dropout.
// Degenerate Sharpe (constant rewards) maps to NaN so derivative-free
// optimizers treat the point as infeasible.
double eval_objective(const AgentParams& params, std::span<const timeseries::FeatureWindow> windows,
                      std::span<const double> returns, const ExperimentConfig& cfg) {
  const auto trace = agent_positions(params, windows);
  const auto rewards = objectives::trading_returns(trace.positions, returns, cfg.cost);
  try {
    return objectives::objective_value(rewards, cfg.objective);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateVariance) return kNaN;
    throw;
  }
}

// Fitness over the flat parameter vector. A frozen bias is pinned to its
// configured value whatever the optimizer proposes for that coordinate.
optim::ObjectiveFunction make_fitness(const AgentParams& shape, std::span<const timeseries::FeatureWindow> windows,
                                      std::span<const double> returns, const ExperimentConfig& cfg,
                                      std::uint64_t iteration_offset) {
  optim::ObjectiveFunction f;
  f.dim = flatten_agent(shape).size();
  const auto bias = agent_bias_index(shape);
  const bool pin_bias = !cfg.b_trainable;
  auto pinned = [=, b_value = cfg.b_value](std::span<const double> x) {
    std::vector<double> v(x.begin(), x.end());
    if (pin_bias) v[bias] = b_value;
    return v;
  };
  f.value = [=, &cfg](std::span<const double> x, std::size_t) {
    return eval_objective(unflatten_agent(pinned(x), shape), windows, returns, cfg);
  };
  f.value_and_gradient = [=, &cfg](std::span<const double> x, std::span<double> grad, std::size_t iteration) {
    const auto params = unflatten_agent(pinned(x), shape);
    const auto spec = training_spec(cfg);
    if (const auto* plain = std::get_if<agent::TraderParams>(&params)) {
      const auto g = agent::batch_gradient(*plain, windows, returns, cfg.cost, spec);
      const auto flat = optim::flatten(g.gradient);
      std::copy(flat.begin(), flat.end(), grad.begin());
      return g.objective;
    }
    const auto& deep = std::get<lstm::LstmTraderParams>(params);
    lstm::DropoutMasks masks;
    if (cfg.dropout > 0.0) {
      masks = lstm::sample_pass_masks(deep, windows.size(), train_dropout(cfg), iteration_offset + iteration);
    }
    const auto g = lstm::bptt_gradient(windows, returns, cfg.cost, spec, deep, masks);
    const auto flat = optim::flatten(g);
    std::copy(flat.begin(), flat.end(), grad.begin());
    return g.objective;
  };
  return f;
}

struct FitResult {
  AgentParams params;
  std::vector<double> trace;
  std::vector<optim::TraceRow> rows;
  bool aborted = false;
};

FitResult fit_online(const agent::TraderParams& start, std::span<const timeseries::FeatureWindow> windows,
                     std::span<const double> returns, const ExperimentConfig& cfg, std::size_t epochs) {
  FitResult out;
  auto params = start;
  const auto spec = training_spec(cfg);
  std::vector<double> rewards;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    auto state = agent::OnlineState::zeros(params.m());
    rewards.clear();
    for (std::size_t t = 0; t < windows.size(); ++t) {
      auto step = agent::online_gradient_step(params, windows[t], returns[t], state, cfg.cost, spec,
                                              cfg.learning_rate, cfg.weight_decay, cfg.grad_clip);
      params = std::move(step.params);
      rewards.push_back(step.reward);
    }
    double value = kNaN;
    try {
      value = objectives::objective_value(rewards, cfg.objective);
    } catch (const Error&) {
    }
    out.trace.push_back(value);
    out.rows.push_back({epoch, value, value, 0.0});
  }
  out.params = params;
  return out;
}

FitResult fit(const AgentParams& start, std::span<const timeseries::FeatureWindow> windows,
              std::span<const double> returns, const ExperimentConfig& cfg, std::size_t epochs,
              OptimizerKind optimizer, std::uint64_t iteration_offset) {
  if (cfg.update == UpdateMode::Online && optimizer == OptimizerKind::GradientAscent) {
    return fit_online(std::get<agent::TraderParams>(start), windows, returns, cfg, epochs);
  }
  const auto fitness = make_fitness(start, windows, returns, cfg, iteration_offset);
  const auto x0 = flatten_agent(start);
  const auto bias = agent_bias_index(start);
  FitResult out;
  switch (optimizer) {
    case OptimizerKind::GradientAscent: {
      optim::AscentConfig ac;
      ac.learning_rate = cfg.learning_rate;
      ac.weight_decay = cfg.weight_decay;
      ac.epochs = epochs;
      ac.clip_norm = cfg.grad_clip;
      ac.seed = cfg.seed;
      ac.frozen.assign(fitness.dim, false);
      ac.frozen[bias] = !cfg.b_trainable;
      auto r = optim::gradient_ascent(fitness, x0, ac);
      out.params = unflatten_agent(r.x, start);
      for (std::size_t e = 0; e < r.trace.size(); ++e) out.rows.push_back({e, r.trace[e], r.trace[e], 0.0});
      out.trace = std::move(r.trace);
      out.aborted = r.aborted;
      break;
    }
    case OptimizerKind::NelderMead: {
      optim::NmConfig nc;
      nc.tolerance = cfg.nm_tolerance;
      nc.max_iters = epochs;
      auto r = optim::nelder_mead(optim::negate(fitness), x0, nc);
      if (!cfg.b_trainable) r.x[bias] = cfg.b_value;
      out.params = unflatten_agent(r.x, start);
      for (auto row : r.trace) {
        row.best = -row.best;
        row.mean = -row.mean;
        out.trace.push_back(row.best);
        out.rows.push_back(row);
      }
      break;
    }
    case OptimizerKind::EvolutionStrategy: {
      optim::EsConfig ec;
      ec.mu = cfg.es_mu;
      ec.lambda = cfg.es_lambda;
      ec.sigma0 = cfg.es_sigma0;
      ec.max_iters = epochs;
      ec.seed = derive_seed(cfg.seed, "es") + iteration_offset;
      auto r = optim::evolution_strategy(fitness, x0, ec);
      if (!cfg.b_trainable) r.x[bias] = cfg.b_value;
      out.params = unflatten_agent(r.x, start);
      for (const auto& row : r.trace) out.trace.push_back(row.best);
      out.rows = std::move(r.trace);
      break;
    }
  }
  return out;
}

// Recurrent state carried from one evaluation block to the next.
struct Carry {
  double position = 0.0;
  lstm::LstmState lstm;
};

agent::PositionTrace forward_block(const AgentParams& params, std::span<const timeseries::FeatureWindow> windows,
                                   Carry& carry) {
  if (const auto* plain = std::get_if<agent::TraderParams>(&params)) {
    auto trace = agent::forward(*plain, windows, carry.position);
    carry.position = trace.positions.back();
    return trace;
  }
  auto pass = lstm::stack_forward(windows, std::get<lstm::LstmTraderParams>(params), lstm::DropoutMasks{},
                                  carry.lstm, carry.position);
  carry.position = pass.trace.positions.back();
  carry.lstm = std::move(pass.final_state);
  return std::move(pass.trace);
}

}  // namespace

std::pair<PriceSeries, PriceSeries> split(const PriceSeries& p, std::size_t train_len, std::size_t test_len) {
  if (train_len + test_len > p.size()) {
    throw Error(ErrorCode::InsufficientData, "need " + std::to_string(train_len + test_len) + " bars, have " +
                                                 std::to_string(p.size()));
  }
  return {p.slice(0, train_len), p.slice(train_len, test_len)};
}

timeseries::Standardizer fit_split_standardizer(const PriceSeries& train, bool standardize) {
  if (!standardize) return timeseries::Standardizer::identity();
  const auto r = timeseries::returns_from_prices(train);
  return timeseries::fit_standardizer(r.returns, 0, r.returns.size());
}

Episode make_episode(const PriceSeries& split, std::size_t window, const timeseries::Standardizer& norm) {
  if (split.size() < window + 2) {
    throw Error(ErrorCode::InsufficientData, "split is too short for the window length");
  }
  const auto r = timeseries::returns_from_prices(split);
  Episode ep;
  ep.windows = timeseries::all_windows(r.returns, window, norm);
  ep.returns.assign(r.returns.begin() + static_cast<std::ptrdiff_t>(window - 1), r.returns.end());
  ep.first_bar = window;
  return ep;
}

AgentParams init_agent(const ExperimentConfig& cfg) {
  const auto seed = derive_seed(cfg.seed, "init");
  if (cfg.agent == AgentKind::PlainRRL) return agent::init_trader(cfg.window, seed, cfg.b_value, cfg.b_trainable);
  return lstm::init_lstm_trader(cfg.window, cfg.hidden, seed, cfg.b_value, cfg.b_trainable);
}

agent::PositionTrace agent_positions(const AgentParams& params, std::span<const timeseries::FeatureWindow> windows) {
  Carry carry;
  return forward_block(params, windows, carry);
}

TrainResult train(const ExperimentConfig& cfg, const PriceSeries& train_split) {
  cfg.validate();
  TrainResult out;
  out.standardizer = fit_split_standardizer(train_split, cfg.standardize);
  const auto ep = make_episode(train_split, cfg.window, out.standardizer);
  out.initial = init_agent(cfg);
  auto r = fit(out.initial, ep.windows, ep.returns, cfg, cfg.epochs, cfg.optimizer, 0);
  out.params = std::move(r.params);
  out.trace = std::move(r.trace);
  out.optimizer_rows = std::move(r.rows);
  out.aborted = r.aborted;
  return out;
}

TradeStats trade_stats(std::span<const double> positions, std::span<const Timestamp> timestamps, double delta) {
  if (positions.size() != timestamps.size()) {
    throw Error(ErrorCode::LengthMismatch, "positions and timestamps are not aligned");
  }
  TradeStats out;
  int state = 0;
  for (double f : positions) {
    const int next = agent::discretize(f, delta);
    if (next != state) ++out.trade_count;
    state = next;
  }
  const double span_hours =
      timestamps.empty() ? 0.0 : static_cast<double>(timestamps.back() - timestamps.front()) / 3600.0;
  out.no_trades = out.trade_count == 0;
  out.mean_holding_hours = out.no_trades ? span_hours : span_hours / static_cast<double>(out.trade_count);
  return out;
}

SplitEvaluation evaluate(const AgentParams& params, const PriceSeries& split, const ExperimentConfig& cfg,
                         const timeseries::Standardizer& norm) {
  const auto ep = make_episode(split, cfg.window, norm);
  if (const auto* deep = std::get_if<lstm::LstmTraderParams>(&params)) {
    deep->validate();
    if (deep->layers.front().input_size() != cfg.window) {
      throw Error(ErrorCode::DimensionMismatch, "LSTM input size differs from the configured window");
    }
  } else if (std::get<agent::TraderParams>(params).m() != cfg.window) {
    throw Error(ErrorCode::DimensionMismatch, "trader input size differs from the configured window");
  }

  const std::size_t n = split.size();
  SplitEvaluation out;
  out.timestamps.assign(split.timestamps().begin(), split.timestamps().end());
  out.prices.assign(split.prices().begin(), split.prices().end());
  out.positions.assign(n, 0.0);
  out.rewards.assign(n, 0.0);

  // Decision t trades bar first_bar + t. Blocks partition the bars; state
  // carries across block boundaries.
  AgentParams current = params;
  Carry carry;
  std::vector<double> positions{0.0};
  std::size_t steps_done = 0;
  for (std::size_t block_start = 0; block_start < n; block_start += cfg.block_len) {
    const std::size_t block_end = std::min(n, block_start + cfg.block_len);
    const std::size_t t_begin = steps_done;
    std::size_t t_end = t_begin;
    while (t_end < ep.windows.size() && ep.first_bar + t_end < block_end) ++t_end;
    if (t_end == t_begin) continue;
    const std::span<const timeseries::FeatureWindow> win(ep.windows.data() + t_begin, t_end - t_begin);
    const auto trace = forward_block(current, win, carry);
    positions.insert(positions.end(), trace.positions.begin() + 1, trace.positions.end());
    steps_done = t_end;

    if (cfg.retrain_between_blocks && t_end < ep.windows.size() && t_end - t_begin >= 2) {
      const std::span<const double> ret(ep.returns.data() + t_begin, t_end - t_begin);
      try {
        current = fit(current, win, ret, cfg, cfg.retrain_epochs, OptimizerKind::GradientAscent,
                      cfg.epochs + block_start)
                      .params;
      } catch (const Error& e) {
        // A block with constant rewards has nothing to learn from.
        if (e.code() != ErrorCode::DegenerateVariance) throw;
      }
    }
  }

  const auto rewards = objectives::trading_returns(positions, ep.returns, cfg.cost);
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    out.positions[ep.first_bar + t] = positions[t + 1];
    out.rewards[ep.first_bar + t] = rewards[t];
  }
  out.equity = objectives::equity_curve(out.rewards);
  try {
    out.sharpe = objectives::sharpe_ratio(rewards);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateVariance) throw;
    out.sharpe = 0.0;
    out.sharpe_degenerate = true;
  }
  const auto d = objectives::ddr(rewards, cfg.objective);
  out.ddr = d.value;
  out.ddr_degenerate = d.degenerate;
  out.trades = trade_stats(out.positions, out.timestamps, cfg.delta);
  out.max_drawdown = objectives::max_drawdown(out.equity);
  out.total_profit = out.equity.back();

  int state = 0;
  for (std::size_t first = 0; first < n; first += cfg.block_len) {
    BlockStats b;
    b.first_bar = first;
    b.last_bar = std::min(n, first + cfg.block_len) - 1;
    for (std::size_t k = first; k <= b.last_bar; ++k) {
      b.profit += out.rewards[k];
      const int next = agent::discretize(out.positions[k], cfg.delta);
      if (next != state) ++b.trade_count;
      state = next;
    }
    out.blocks.push_back(b);
  }
  return out;
}

BacktestReport run_experiment(const ExperimentConfig& cfg, const PriceSeries& data) {
  cfg.validate();
  const auto [train_split, test_split] = split(data, cfg.train_len, cfg.test_len);
  auto trained = train(cfg, train_split);
  BacktestReport report;
  report.config = cfg;
  report.objective_trace = std::move(trained.trace);
  report.optimizer_rows = std::move(trained.optimizer_rows);
  report.training_aborted = trained.aborted;
  report.train = evaluate(trained.params, train_split, cfg, trained.standardizer);
  report.test = evaluate(trained.params, test_split, cfg, trained.standardizer);
  report.test_initial = evaluate(trained.initial, test_split, cfg, trained.standardizer);
  report.params = std::move(trained.params);
  return report;
}

BacktestReport run_experiment(const ExperimentConfig& cfg) { return run_experiment(cfg, load_market(cfg)); }

text::KeyValues params_snapshot(const AgentParams& params, std::uint64_t seed) {
  if (const auto* plain = std::get_if<agent::TraderParams>(&params)) return agent::to_snapshot(*plain, seed);
  return lstm::to_snapshot(std::get<lstm::LstmTraderParams>(params), seed);
}

}  // namespace rrl::backtest
