#include <algorithm>
#include <atomic>
#include <mutex>
#include <ostream>
#include <thread>

#include "rrl/backtest.hpp"
#include "rrl/error.hpp"

namespace rrl::backtest {

namespace {

ExperimentConfig base_cell(std::uint64_t seed) {
  ExperimentConfig c;
  c.seed = seed;
  c.epochs = 500;
  c.train_len = 1000;
  c.test_len = 1000;
  return c;
}

// b = 1 vs b = 5, both frozen, on trending data with the LSTM trader.
void add_bias(ExperimentGrid& g, std::uint64_t seed) {
  auto c = base_cell(seed);
  c.agent = AgentKind::LstmRRL;
  c.dropout = 0.55;
  c.data = "synthetic:trend";
  c.cost.cost = 0.0005;
  c.b_trainable = false;
  c.name = "bias_b1";
  c.b_value = 1.0;
  g.cells.push_back(c);
  c.name = "bias_b5";
  c.b_value = 5.0;
  g.cells.push_back(c);
  g.pairs.emplace_back(g.cells.size() - 2, g.cells.size() - 1);
  g.pair_labels.emplace_back("bias b=1 vs b=5");
}

void add_lstm_vs_rrl(ExperimentGrid& g, std::uint64_t seed) {
  auto c = base_cell(seed);
  c.data = "synthetic:trend";
  c.cost.cost = 0.0005;
  c.b_trainable = false;
  c.b_value = 5.0;
  c.name = "lstm_b5";
  c.agent = AgentKind::LstmRRL;
  c.dropout = 0.55;
  g.cells.push_back(c);
  c.name = "rrl_b5";
  c.agent = AgentKind::PlainRRL;
  c.dropout = 0.0;
  g.cells.push_back(c);
  g.pairs.emplace_back(g.cells.size() - 2, g.cells.size() - 1);
  g.pair_labels.emplace_back("LSTM-RRL vs RRL");
}

void add_ddr_vs_sharpe(ExperimentGrid& g, std::uint64_t seed) {
  auto c = base_cell(seed);
  c.data = "synthetic:jump";
  c.agent = AgentKind::PlainRRL;
  c.name = "sharpe_jump";
  c.objective.kind = objectives::ObjectiveKind::Sharpe;
  g.cells.push_back(c);
  c.name = "ddr_jump";
  c.objective.kind = objectives::ObjectiveKind::DownsideDeviation;
  g.cells.push_back(c);
  g.pairs.emplace_back(g.cells.size() - 2, g.cells.size() - 1);
  g.pair_labels.emplace_back("Sharpe vs DDR");
}

}  // namespace

ExperimentGrid preset_grid(std::string_view preset, std::uint64_t seed) {
  ExperimentGrid g;
  if (preset == "bias") {
    add_bias(g, seed);
  } else if (preset == "lstm-vs-rrl") {
    add_lstm_vs_rrl(g, seed);
  } else if (preset == "ddr-vs-sharpe") {
    add_ddr_vs_sharpe(g, seed);
  } else if (preset == "paper-v") {
    add_bias(g, seed);
    add_lstm_vs_rrl(g, seed);
    add_ddr_vs_sharpe(g, seed);
  } else {
    throw Error(ErrorCode::Usage, "unknown preset '" + std::string(preset) + "'");
  }
  return g;
}

bool SuiteResult::all_ok() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellOutcome& c) { return c.report.has_value(); });
}

SuiteResult run_experiment_suite(const ExperimentGrid& grid, std::size_t jobs,
                                 const std::optional<PriceSeries>& data) {
  if (grid.cells.empty()) throw Error(ErrorCode::Usage, "experiment grid is empty");
  SuiteResult out;
  out.cells.resize(grid.cells.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.cells.size(); i = next++) {
      auto& cell = out.cells[i];
      try {
        cell.report = data ? run_experiment(grid.cells[i], *data) : run_experiment(grid.cells[i]);
      } catch (const Error& e) {
        cell.error = e.what();
        cell.error_category = std::string(e.category());
      } catch (const std::exception& e) {
        cell.error = e.what();
        cell.error_category = "internal";
      }
    }
  };
  const auto threads = std::clamp<std::size_t>(jobs, 1, grid.cells.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  for (std::size_t p = 0; p < grid.pairs.size(); ++p) {
    const auto [a, b] = grid.pairs[p];
    const auto& ra = out.cells[a].report;
    const auto& rb = out.cells[b].report;
    if (!ra || !rb) continue;
    ComparisonRow row;
    row.label = p < grid.pair_labels.size() ? grid.pair_labels[p] : "pair " + std::to_string(p);
    row.first = ra->config.name;
    row.second = rb->config.name;
    row.profit_first = ra->test.total_profit;
    row.profit_second = rb->test.total_profit;
    row.trades_first = ra->test.trades.trade_count;
    row.trades_second = rb->test.trades.trade_count;
    row.drawdown_first = ra->test.max_drawdown;
    row.drawdown_second = rb->test.max_drawdown;
    out.comparisons.push_back(std::move(row));
  }
  return out;
}

void write_summary_table(std::ostream& out, const SuiteResult& suite) {
  out << "name,agent,objective,b,status,test_profit,test_sharpe,test_ddr,trades,mean_holding_hours,max_drawdown\n";
  for (const auto& cell : suite.cells) {
    if (!cell.report) {
      out << "?,?,?,?,error:" << cell.error_category << ",,,,,,\n";
      continue;
    }
    const auto& r = *cell.report;
    const auto& t = r.test;
    out << r.config.name << ',' << to_string(r.config.agent) << ',' << objectives::to_string(r.config.objective.kind)
        << ',' << text::format_double(r.config.b_value) << ",ok," << text::format_double(t.total_profit) << ','
        << text::format_double(t.sharpe) << ',' << text::format_double(t.ddr) << ',' << t.trades.trade_count << ','
        << text::format_double(t.trades.mean_holding_hours) << ',' << text::format_double(t.max_drawdown) << '\n';
  }
  out << '\n';
  out << "comparison,first,second,profit_first,profit_second,trades_first,trades_second,drawdown_first,drawdown_second\n";
  for (const auto& c : suite.comparisons) {
    out << c.label << ',' << c.first << ',' << c.second << ',' << text::format_double(c.profit_first) << ','
        << text::format_double(c.profit_second) << ',' << c.trades_first << ',' << c.trades_second << ','
        << text::format_double(c.drawdown_first) << ',' << text::format_double(c.drawdown_second) << '\n';
  }
}

}  // namespace rrl::backtest
