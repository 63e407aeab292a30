#include <algorithm>
#include <sstream>

#include "rrl/backtest.hpp"
#include "rrl/error.hpp"
#include "rrl/random.hpp"

namespace rrl::backtest {

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<std::size_t> parse_sizes(std::string_view s) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto part = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    const auto v = text::parse_int(part, "lstm.hidden");
    if (v <= 0) throw Error(ErrorCode::InvalidConfig, "hidden sizes must be positive");
    out.push_back(static_cast<std::size_t>(v));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::size_t get_size(const text::KeyValues& kv, std::string_view key, std::size_t fallback) {
  const auto v = kv.get_int_or(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

std::string_view to_string(AgentKind k) { return k == AgentKind::PlainRRL ? "plain" : "lstm"; }

std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::GradientAscent: return "ascent";
    case OptimizerKind::NelderMead: return "nelder-mead";
    case OptimizerKind::EvolutionStrategy: return "es";
  }
  return "ascent";
}

std::string_view to_string(UpdateMode k) { return k == UpdateMode::Batch ? "batch" : "online"; }

void ExperimentConfig::validate() const {
  objective.validate();
  cost.validate();
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (epochs < 1) fail("epochs must be at least 1");
  if (window < 1) fail("window must be at least 1");
  if (train_len < window + 3 || test_len < window + 3) fail("splits must be longer than the window plus two bars");
  if (!(learning_rate >= 0.0)) fail("learning_rate must be non-negative");
  if (!(weight_decay >= 0.0 && weight_decay < 1.0)) fail("weight_decay must lie in [0, 1)");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidRate, "dropout must lie in [0, 1)");
  if (agent == AgentKind::LstmRRL && hidden.empty()) fail("LSTM agent needs hidden sizes");
  if (agent == AgentKind::LstmRRL && update == UpdateMode::Online) fail("online updates are only defined for the plain trader");
  if (es_mu < 1 || es_lambda < es_mu || !(es_sigma0 > 0.0)) fail("invalid evolution strategy settings");
  if (block_len < 1) fail("block_len must be at least 1");
  if (!(delta >= 0.0 && delta < 1.0)) fail("delta must lie in [0, 1)");
}

text::KeyValues to_key_values(const ExperimentConfig& cfg) {
  text::KeyValues kv;
  kv.set("experiment.name", cfg.name);
  kv.set("experiment.agent", std::string(to_string(cfg.agent)));
  kv.set("experiment.objective", std::string(objectives::to_string(cfg.objective.kind)));
  kv.set("experiment.epsilon", cfg.objective.epsilon);
  kv.set("experiment.optimizer", std::string(to_string(cfg.optimizer)));
  kv.set("experiment.update", std::string(to_string(cfg.update)));
  kv.set("experiment.epochs", std::to_string(cfg.epochs));
  kv.set("experiment.seed", std::to_string(cfg.seed));
  kv.set("experiment.data", cfg.data);
  kv.set("experiment.train_len", std::to_string(cfg.train_len));
  kv.set("experiment.test_len", std::to_string(cfg.test_len));
  kv.set("experiment.window", std::to_string(cfg.window));
  kv.set("experiment.standardize", cfg.standardize ? "true" : "false");
  kv.set("experiment.block_len", std::to_string(cfg.block_len));
  kv.set("experiment.retrain_between_blocks", cfg.retrain_between_blocks ? "true" : "false");
  kv.set("experiment.retrain_epochs", std::to_string(cfg.retrain_epochs));
  kv.set("experiment.delta", cfg.delta);
  kv.set("trader.b_value", cfg.b_value);
  kv.set("trader.b_trainable", cfg.b_trainable ? "true" : "false");
  kv.set("ascent.learning_rate", cfg.learning_rate);
  kv.set("ascent.weight_decay", cfg.weight_decay);
  kv.set("ascent.grad_clip", cfg.grad_clip);
  kv.set("lstm.hidden", join_sizes(cfg.hidden));
  kv.set("lstm.dropout", cfg.dropout);
  kv.set("es.mu", std::to_string(cfg.es_mu));
  kv.set("es.lambda", std::to_string(cfg.es_lambda));
  kv.set("es.sigma0", cfg.es_sigma0);
  kv.set("nelder_mead.tolerance", cfg.nm_tolerance);
  kv.set("cost.s", cfg.cost.shares);
  kv.set("cost.c", cfg.cost.cost);
  return kv;
}

ExperimentConfig config_from_key_values(const text::KeyValues& kv, ExperimentConfig c) {
  static const char* const known[] = {
      "experiment.name", "experiment.agent", "experiment.objective", "experiment.epsilon", "experiment.optimizer",
      "experiment.update", "experiment.epochs", "experiment.seed", "experiment.data", "experiment.train_len",
      "experiment.test_len", "experiment.window", "experiment.standardize", "experiment.block_len",
      "experiment.retrain_between_blocks", "experiment.retrain_epochs", "experiment.delta", "trader.b_value",
      "trader.b_trainable", "ascent.learning_rate", "ascent.weight_decay", "ascent.grad_clip", "lstm.hidden",
      "lstm.dropout", "es.mu", "es.lambda", "es.sigma0", "nelder_mead.tolerance", "cost.s", "cost.c"};
  for (const auto& [k, v] : kv.entries()) {
    if (std::find(std::begin(known), std::end(known), k) == std::end(known)) {
      throw Error(ErrorCode::InvalidConfig, "unknown config key '" + k + "'");
    }
  }

  c.name = kv.get_or("experiment.name", c.name);
  const auto agent = kv.get_or("experiment.agent", std::string(to_string(c.agent)));
  if (agent == "plain") c.agent = AgentKind::PlainRRL;
  else if (agent == "lstm") c.agent = AgentKind::LstmRRL;
  else throw Error(ErrorCode::InvalidConfig, "unknown agent '" + agent + "'");
  c.objective.kind = objectives::objective_kind_from_string(
      kv.get_or("experiment.objective", std::string(objectives::to_string(c.objective.kind))));
  c.objective.epsilon = kv.get_double_or("experiment.epsilon", c.objective.epsilon);
  const auto opt = kv.get_or("experiment.optimizer", std::string(to_string(c.optimizer)));
  if (opt == "ascent") c.optimizer = OptimizerKind::GradientAscent;
  else if (opt == "nelder-mead") c.optimizer = OptimizerKind::NelderMead;
  else if (opt == "es") c.optimizer = OptimizerKind::EvolutionStrategy;
  else throw Error(ErrorCode::InvalidConfig, "unknown optimizer '" + opt + "'");
  const auto upd = kv.get_or("experiment.update", std::string(to_string(c.update)));
  if (upd == "batch") c.update = UpdateMode::Batch;
  else if (upd == "online") c.update = UpdateMode::Online;
  else throw Error(ErrorCode::InvalidConfig, "unknown update mode '" + upd + "'");
  c.epochs = get_size(kv, "experiment.epochs", c.epochs);
  c.seed = static_cast<std::uint64_t>(kv.get_int_or("experiment.seed", static_cast<std::int64_t>(c.seed)));
  c.data = kv.get_or("experiment.data", c.data);
  c.train_len = get_size(kv, "experiment.train_len", c.train_len);
  c.test_len = get_size(kv, "experiment.test_len", c.test_len);
  c.window = get_size(kv, "experiment.window", c.window);
  c.standardize = kv.get_bool_or("experiment.standardize", c.standardize);
  c.block_len = get_size(kv, "experiment.block_len", c.block_len);
  c.retrain_between_blocks = kv.get_bool_or("experiment.retrain_between_blocks", c.retrain_between_blocks);
  c.retrain_epochs = get_size(kv, "experiment.retrain_epochs", c.retrain_epochs);
  c.delta = kv.get_double_or("experiment.delta", c.delta);
  c.b_value = kv.get_double_or("trader.b_value", c.b_value);
  c.b_trainable = kv.get_bool_or("trader.b_trainable", c.b_trainable);
  c.learning_rate = kv.get_double_or("ascent.learning_rate", c.learning_rate);
  c.weight_decay = kv.get_double_or("ascent.weight_decay", c.weight_decay);
  c.grad_clip = kv.get_double_or("ascent.grad_clip", c.grad_clip);
  if (kv.contains("lstm.hidden")) c.hidden = parse_sizes(kv.get("lstm.hidden"));
  c.dropout = kv.get_double_or("lstm.dropout", c.dropout);
  c.es_mu = get_size(kv, "es.mu", c.es_mu);
  c.es_lambda = get_size(kv, "es.lambda", c.es_lambda);
  c.es_sigma0 = kv.get_double_or("es.sigma0", c.es_sigma0);
  c.nm_tolerance = kv.get_double_or("nelder_mead.tolerance", c.nm_tolerance);
  c.cost.shares = kv.get_double_or("cost.s", c.cost.shares);
  c.cost.cost = kv.get_double_or("cost.c", c.cost.cost);
  c.validate();
  return c;
}

PriceSeries load_market(const ExperimentConfig& cfg) {
  const auto bars = cfg.train_len + cfg.test_len;
  const auto seed = derive_seed(cfg.seed, "data");
  if (cfg.data == "synthetic:sine") return sine_market(bars, seed);
  if (cfg.data == "synthetic:trend") return trend_market(bars, seed);
  if (cfg.data == "synthetic:jump") return jump_market(bars, seed);
  if (cfg.data.rfind("synthetic:", 0) == 0) {
    throw Error(ErrorCode::InvalidConfig, "unknown synthetic market '" + cfg.data + "'");
  }
  return timeseries::load_csv(cfg.data);
}

}  // namespace rrl::backtest
