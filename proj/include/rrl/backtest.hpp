#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rrl/lstm.hpp"
#include "rrl/objectives.hpp"
#include "rrl/optim.hpp"
#include "rrl/rrl_agent.hpp"
#include "rrl/text.hpp"
#include "rrl/timeseries.hpp"

namespace rrl::backtest {

using timeseries::PriceSeries;
using timeseries::Timestamp;

// ---------------------------------------------------------------------------
// Synthetic markets. All start at 2017-01-06 00:00 UTC with 30-minute bars.

inline constexpr Timestamp kSyntheticStart = 1483660800;
inline constexpr std::int64_t kSyntheticInterval = 1800;

// p_k = level + amplitude sin(2 pi k / period + phase) + N(0, noise_sd) noise;
// the phase is drawn from the seed.
PriceSeries sine_market(std::size_t bars, std::uint64_t seed, double period = 50.0, double amplitude = 1.0,
                        double level = 10.0, double noise_sd = 0.0);

// Piecewise-linear trend whose direction flips after geometrically distributed
// regime lengths, plus Gaussian noise.
PriceSeries trend_market(std::size_t bars, std::uint64_t seed, double drift = 0.02, double noise_sd = 0.05,
                         double mean_regime = 100.0, double level = 100.0);

// Drifting market hit by downward jumps; volatility is elevated for a while
// after each jump.
PriceSeries jump_market(std::size_t bars, std::uint64_t seed, double drift = 0.01, double noise_sd = 0.05,
                        double jump_rate = 0.01, double jump_size = 1.5, double level = 100.0);

// ---------------------------------------------------------------------------
// Configuration

enum class AgentKind { PlainRRL, LstmRRL };
enum class OptimizerKind { GradientAscent, NelderMead, EvolutionStrategy };
enum class UpdateMode { Batch, Online };

struct ExperimentConfig {
  std::string name = "run";
  AgentKind agent = AgentKind::PlainRRL;
  objectives::ObjectiveSpec objective;
  OptimizerKind optimizer = OptimizerKind::GradientAscent;
  UpdateMode update = UpdateMode::Batch;
  double learning_rate = 0.1;
  double weight_decay = 0.0;
  double grad_clip = 10.0;
  std::size_t es_mu = 5;
  std::size_t es_lambda = 20;
  double es_sigma0 = 0.1;
  double nm_tolerance = 1e-8;
  std::size_t train_len = 1000;
  std::size_t test_len = 1000;
  std::size_t window = 8;
  double b_value = 0.0;
  bool b_trainable = true;
  double dropout = 0.0;
  std::vector<std::size_t> hidden = {16};
  std::size_t epochs = 500;
  std::size_t block_len = 200;
  bool retrain_between_blocks = false;
  std::size_t retrain_epochs = 10;
  bool standardize = true;
  double delta = 0.2;  // discretizer threshold for trade statistics
  std::uint64_t seed = 1;
  objectives::CostModel cost;
  // "synthetic:sine", "synthetic:trend", "synthetic:jump", or a CSV path.
  std::string data = "synthetic:sine";

  void validate() const;
};

std::string_view to_string(AgentKind k);
std::string_view to_string(OptimizerKind k);
std::string_view to_string(UpdateMode k);

// Sectioned key/value form; see README for the key list.
text::KeyValues to_key_values(const ExperimentConfig& cfg);
ExperimentConfig config_from_key_values(const text::KeyValues& kv, ExperimentConfig base = {});

// Data for a config: loads the CSV or generates the synthetic market with a
// sub-seed of cfg.seed, long enough for train_len + test_len bars.
PriceSeries load_market(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Protocol

std::pair<PriceSeries, PriceSeries> split(const PriceSeries& p, std::size_t train_len, std::size_t test_len);

// The decision sequence inside one split: windows[t] is the input at bar
// first_bar + t and returns[t] the return of that bar.
struct Episode {
  std::vector<timeseries::FeatureWindow> windows;
  std::vector<double> returns;
  std::size_t first_bar = 0;
};

Episode make_episode(const PriceSeries& split, std::size_t window, const timeseries::Standardizer& norm);
timeseries::Standardizer fit_split_standardizer(const PriceSeries& train, bool standardize);

using AgentParams = std::variant<agent::TraderParams, lstm::LstmTraderParams>;

AgentParams init_agent(const ExperimentConfig& cfg);

// Positions in eval mode (no dropout), F_0 = 0.
agent::PositionTrace agent_positions(const AgentParams& params, std::span<const timeseries::FeatureWindow> windows);

struct TrainResult {
  AgentParams initial;
  AgentParams params;
  std::vector<double> trace;  // objective per epoch / iteration / generation
  std::vector<optim::TraceRow> optimizer_rows;
  timeseries::Standardizer standardizer;
  bool aborted = false;
};

TrainResult train(const ExperimentConfig& cfg, const PriceSeries& train_split);

struct TradeStats {
  std::size_t trade_count = 0;
  double mean_holding_hours = 0.0;
  bool no_trades = false;  // holding time is then the full span
};

// A trade is a change of the discretized state (long / flat / short); the
// first entry from flat counts as one.
TradeStats trade_stats(std::span<const double> positions, std::span<const Timestamp> timestamps, double delta);

struct BlockStats {
  std::size_t first_bar = 0;
  std::size_t last_bar = 0;  // inclusive
  double profit = 0.0;
  std::size_t trade_count = 0;
};

// Bar-level view of one split. Bars before the first full window hold a flat
// position and zero reward.
struct SplitEvaluation {
  std::vector<Timestamp> timestamps;
  std::vector<double> prices;
  std::vector<double> positions;
  std::vector<double> rewards;
  std::vector<double> equity;
  double sharpe = 0.0;
  bool sharpe_degenerate = false;
  double ddr = 0.0;
  bool ddr_degenerate = false;
  TradeStats trades;
  double max_drawdown = 0.0;
  double total_profit = 0.0;
  std::vector<BlockStats> blocks;
};

// Forward pass only. Parameters are not modified; with retrain_between_blocks
// a private copy is fine-tuned on each block after it has been traded.
SplitEvaluation evaluate(const AgentParams& params, const PriceSeries& split, const ExperimentConfig& cfg,
                         const timeseries::Standardizer& norm);

struct BacktestReport {
  ExperimentConfig config;
  std::vector<double> objective_trace;
  std::vector<optim::TraceRow> optimizer_rows;
  SplitEvaluation train;
  SplitEvaluation test;
  SplitEvaluation test_initial;  // freshly initialized agent on the test split
  AgentParams params;
  bool training_aborted = false;
};

BacktestReport run_experiment(const ExperimentConfig& cfg, const PriceSeries& data);
BacktestReport run_experiment(const ExperimentConfig& cfg);

text::KeyValues params_snapshot(const AgentParams& params, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Experiment grids

struct ExperimentGrid {
  std::vector<ExperimentConfig> cells;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // cells compared head to head
  std::vector<std::string> pair_labels;
};

// "bias", "lstm-vs-rrl", "ddr-vs-sharpe", "paper-v"
ExperimentGrid preset_grid(std::string_view preset, std::uint64_t seed);

struct CellOutcome {
  std::optional<BacktestReport> report;
  std::string error;
  std::string error_category;
};

struct ComparisonRow {
  std::string label;
  std::string first;
  std::string second;
  double profit_first = 0.0, profit_second = 0.0;
  std::size_t trades_first = 0, trades_second = 0;
  double drawdown_first = 0.0, drawdown_second = 0.0;
};

struct SuiteResult {
  std::vector<CellOutcome> cells;
  std::vector<ComparisonRow> comparisons;

  bool all_ok() const;
};

// Cells run on up to `jobs` threads; each owns its agent, RNG and report.
// If data is given every cell trades it; otherwise each cell loads its own market.
SuiteResult run_experiment_suite(const ExperimentGrid& grid, std::size_t jobs,
                                 const std::optional<PriceSeries>& data = std::nullopt);

void write_summary_table(std::ostream& out, const SuiteResult& suite);

// ---------------------------------------------------------------------------
// Report files: a "[meta]" block, "[config]" and "[summary]" key/value blocks,
// then "[csv <name>]" sections (header row + data rows).

void write_report(std::ostream& out, const BacktestReport& report, std::string_view params_file = "");

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws ParseError when absent
};

struct ParsedReport {
  text::KeyValues meta;
  text::KeyValues config;
  text::KeyValues summary;
  std::vector<std::pair<std::string, CsvTable>> tables;

  const CsvTable* table(std::string_view name) const;
};

ParsedReport parse_report(std::istream& in);

}  // namespace rrl::backtest
