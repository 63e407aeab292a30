#include <algorithm>
#include <istream>
#include <ostream>

#include "rrl/backtest.hpp"
#include "rrl/error.hpp"

namespace rrl::backtest {

namespace {

using text::format_double;

void summary_block(text::KeyValues& kv, const std::string& prefix, const SplitEvaluation& e) {
  kv.set(prefix + ".sharpe", e.sharpe);
  kv.set(prefix + ".sharpe_degenerate", e.sharpe_degenerate ? "true" : "false");
  kv.set(prefix + ".ddr", e.ddr);
  kv.set(prefix + ".ddr_degenerate", e.ddr_degenerate ? "true" : "false");
  kv.set(prefix + ".trade_count", std::to_string(e.trades.trade_count));
  kv.set(prefix + ".mean_holding_hours", e.trades.mean_holding_hours);
  kv.set(prefix + ".no_trades", e.trades.no_trades ? "true" : "false");
  kv.set(prefix + ".max_drawdown", e.max_drawdown);
  kv.set(prefix + ".total_profit", e.total_profit);
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

void write_report(std::ostream& out, const BacktestReport& r, std::string_view params_file) {
  out << "# rrl backtest report\n";
  out << "[meta]\n";
  out << "format=rrl-report-1\n";
  out << "name=" << r.config.name << '\n';
  out << "seed=" << r.config.seed << '\n';
  out << "params_file=" << params_file << '\n';
  out << "training_aborted=" << (r.training_aborted ? "true" : "false") << '\n';

  out << "[config]\n";
  to_key_values(r.config).write(out);

  out << "[summary]\n";
  text::KeyValues s;
  summary_block(s, "train", r.train);
  summary_block(s, "test", r.test);
  summary_block(s, "test_initial", r.test_initial);
  s.set("test.profit_vs_initial", r.test.total_profit - r.test_initial.total_profit);
  s.write(out);

  out << "[csv objective_trace]\nepoch,value\n";
  for (std::size_t e = 0; e < r.objective_trace.size(); ++e) out << e << ',' << format_double(r.objective_trace[e]) << '\n';

  out << "[csv optimizer_trace]\niteration,best,mean,sigma\n";
  for (const auto& row : r.optimizer_rows) {
    out << row.iteration << ',' << format_double(row.best) << ',' << format_double(row.mean) << ','
        << format_double(row.sigma) << '\n';
  }

  out << "[csv train]\nbar,timestamp,price,position,reward,equity\n";
  const auto& tr = r.train;
  for (std::size_t k = 0; k < tr.prices.size(); ++k) {
    out << k << ',' << tr.timestamps[k] << ',' << format_double(tr.prices[k]) << ',' << format_double(tr.positions[k])
        << ',' << format_double(tr.rewards[k]) << ',' << format_double(tr.equity[k]) << '\n';
  }

  out << "[csv test]\nbar,timestamp,price,position,reward,equity,initial_position,initial_equity\n";
  const auto& te = r.test;
  const auto& ti = r.test_initial;
  for (std::size_t k = 0; k < te.prices.size(); ++k) {
    out << k << ',' << te.timestamps[k] << ',' << format_double(te.prices[k]) << ',' << format_double(te.positions[k])
        << ',' << format_double(te.rewards[k]) << ',' << format_double(te.equity[k]) << ','
        << format_double(ti.positions[k]) << ',' << format_double(ti.equity[k]) << '\n';
  }

  out << "[csv test_blocks]\nblock,first_bar,last_bar,profit,trade_count\n";
  for (std::size_t b = 0; b < te.blocks.size(); ++b) {
    const auto& bl = te.blocks[b];
    out << b << ',' << bl.first_bar << ',' << bl.last_bar << ',' << format_double(bl.profit) << ',' << bl.trade_count
        << '\n';
  }
}

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::ParseError, "report table lacks column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

const CsvTable* ParsedReport::table(std::string_view name) const {
  for (const auto& [n, t] : tables) {
    if (n == name) return &t;
  }
  return nullptr;
}

ParsedReport parse_report(std::istream& in) {
  ParsedReport out;
  enum class Mode { None, Meta, Config, Summary, Csv } mode = Mode::None;
  CsvTable* table = nullptr;
  bool want_header = false;
  bool saw_meta = false;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::ParseError, "report line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto s = text::trim(line);
    if (s.empty() || s.front() == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail("unterminated section header");
      const auto name = s.substr(1, s.size() - 2);
      table = nullptr;
      if (name == "meta") {
        mode = Mode::Meta;
        saw_meta = true;
      } else if (name == "config") {
        mode = Mode::Config;
      } else if (name == "summary") {
        mode = Mode::Summary;
      } else if (name.rfind("csv ", 0) == 0) {
        mode = Mode::Csv;
        out.tables.emplace_back(std::string(text::trim(name.substr(4))), CsvTable{});
        table = &out.tables.back().second;
        want_header = true;
      } else {
        fail("unknown section '" + std::string(name) + "'");
      }
      continue;
    }
    if (mode == Mode::Csv) {
      auto fields = split_csv(s);
      if (want_header) {
        table->header = std::move(fields);
        want_header = false;
      } else {
        if (fields.size() != table->header.size()) fail("row width differs from header");
        table->rows.push_back(std::move(fields));
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos || mode == Mode::None) fail("expected key=value inside a section");
    auto key = std::string(text::trim(s.substr(0, eq)));
    auto value = std::string(text::trim(s.substr(eq + 1)));
    if (mode == Mode::Meta) out.meta.set(std::move(key), std::move(value));
    else if (mode == Mode::Config) out.config.set(std::move(key), std::move(value));
    else out.summary.set(std::move(key), std::move(value));
  }
  if (!saw_meta) throw Error(ErrorCode::ParseError, "report has no [meta] block");
  return out;
}

}  // namespace rrl::backtest
