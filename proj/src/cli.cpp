#include "rrl/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rrl/error.hpp"
#include "rrl/random.hpp"

namespace rrl::cli {

namespace fs = std::filesystem;

namespace {

text::KeyValues read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open config file " + path.string());
  return text::parse_sectioned(in);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, "cannot create output directory " + dir.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return out;
}

void report_error(std::ostream& err, std::string_view category, std::string_view message) {
  err << "error category=" << category << " message=" << message << '\n';
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    report_error(err, e.category(), e.what());
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    report_error(err, "internal", e.what());
    return kNumeric;
  }
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  return timeseries::format_timestamp(secs);
}

// Writes <name>.report and <name>.params into dir.
fs::path write_run_files(const backtest::BacktestReport& report, const fs::path& dir) {
  const auto params_name = report.config.name + ".params";
  {
    auto out = open_out(dir / params_name);
    backtest::params_snapshot(report.params, report.config.seed).write(out);
  }
  const auto report_path = dir / (report.config.name + ".report");
  auto out = open_out(report_path);
  backtest::write_report(out, report, params_name);
  return report_path;
}

void copy_columns(const backtest::CsvTable& t, const std::vector<std::string>& cols, const fs::path& path) {
  std::vector<std::size_t> idx;
  std::vector<std::string> present;
  for (const auto& c : cols) {
    if (std::find(t.header.begin(), t.header.end(), c) != t.header.end()) {
      idx.push_back(t.column(c));
      present.push_back(c);
    }
  }
  auto out = open_out(path);
  for (std::size_t i = 0; i < present.size(); ++i) out << (i ? "," : "") << present[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < idx.size(); ++i) out << (i ? "," : "") << row[idx[i]];
    out << '\n';
  }
}

}  // namespace

int exit_code_for(std::string_view category) {
  if (category.rfind("io.", 0) == 0 || category.rfind("data.", 0) == 0) return kIo;
  if (category.rfind("numeric.", 0) == 0) return kNumeric;
  return kUsage;
}

void write_manifest(std::ostream& out, const RunManifest& m, std::string_view command) {
  out << "command=" << command << '\n';
  out << "config=" << m.config.string() << '\n';
  out << "data=" << m.data.string() << '\n';
  out << "out=" << m.out.string() << '\n';
  out << "seed=" << m.seed << '\n';
  out << "version=" << m.version << '\n';
  out << "generated_at=" << utc_now() << '\n';
}

std::vector<fs::path> write_plot_data(const backtest::ParsedReport& report, const fs::path& out_dir) {
  ensure_dir(out_dir);
  const auto name = report.meta.get_or("name", "report");
  std::vector<fs::path> written;
  for (const char* split : {"train", "test"}) {
    const auto* t = report.table(split);
    if (!t) continue;
    const std::string stem = name + "." + split;
    copy_columns(*t, {"bar", "timestamp", "price"}, out_dir / (stem + ".price.csv"));
    copy_columns(*t, {"bar", "timestamp", "position", "initial_position"}, out_dir / (stem + ".signal.csv"));
    copy_columns(*t, {"bar", "timestamp", "equity", "initial_equity"}, out_dir / (stem + ".pnl.csv"));
    for (const char* panel : {".price.csv", ".signal.csv", ".pnl.csv"}) written.push_back(out_dir / (stem + panel));
  }
  if (const auto* t = report.table("objective_trace"); t && !t->rows.empty()) {
    copy_columns(*t, {"epoch", "value"}, out_dir / (name + ".objective.csv"));
    written.push_back(out_dir / (name + ".objective.csv"));
  }
  if (written.empty()) throw Error(ErrorCode::ParseError, "report carries no plottable tables");
  return written;
}

backtest::ExperimentGrid grid_from_config(const fs::path& path, std::optional<std::uint64_t> seed) {
  const auto kv = read_config_file(path);
  text::KeyValues base;
  std::vector<std::pair<std::string, std::vector<std::string>>> sweeps;
  for (const auto& [k, v] : kv.entries()) {
    if (k.rfind("grid.", 0) == 0) {
      std::vector<std::string> values;
      std::stringstream ss(v);
      for (std::string item; std::getline(ss, item, '|');) values.emplace_back(text::trim(item));
      sweeps.emplace_back(k.substr(5), std::move(values));
    } else {
      base.set(k, v);
    }
  }
  if (sweeps.empty()) throw Error(ErrorCode::Usage, "config defines no grid.<key> sweep; the grid is empty");

  backtest::ExperimentGrid grid;
  std::size_t combos = 1;
  for (const auto& s : sweeps) combos *= s.second.size();
  for (std::size_t c = 0; c < combos; ++c) {
    auto cell = base;
    std::size_t rest = c;
    for (const auto& [key, values] : sweeps) {
      cell.set(key, values[rest % values.size()]);
      rest /= values.size();
    }
    auto cfg = backtest::config_from_key_values(cell);
    if (seed) cfg.seed = *seed;
    cfg.name += "_" + std::to_string(c);
    grid.cells.push_back(std::move(cfg));
  }
  return grid;
}

int cmd_train(const TrainOptions& opt, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    auto cfg = backtest::config_from_key_values(read_config_file(opt.config));
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.data) {
      if (!fs::exists(*opt.data)) throw Error(ErrorCode::NotFound, "data file " + opt.data->string() + " not found");
      cfg.data = opt.data->string();
    }
    ensure_dir(opt.out);
    const auto report = backtest::run_experiment(cfg);
    const auto path = write_run_files(report, opt.out);
    {
      auto out = open_out(opt.out / "manifest.txt");
      write_manifest(out, {opt.config, opt.data.value_or(fs::path{}), opt.out, cfg.seed}, "train");
    }
    log << "wrote " << path.string() << " test_profit=" << text::format_double(report.test.total_profit)
        << " test_sharpe=" << text::format_double(report.test.sharpe) << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_suite(const SuiteOptions& opt, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    backtest::ExperimentGrid grid;
    if (opt.preset && opt.config) throw Error(ErrorCode::Usage, "give either --preset or --config, not both");
    if (opt.preset) {
      grid = backtest::preset_grid(*opt.preset, opt.seed.value_or(1));
    } else if (opt.config) {
      grid = grid_from_config(*opt.config, opt.seed);
    } else {
      throw Error(ErrorCode::Usage, "suite needs --preset or --config");
    }
    if (grid.cells.empty()) throw Error(ErrorCode::Usage, "experiment grid is empty");

    std::optional<timeseries::PriceSeries> data;
    if (opt.data) {
      data = timeseries::load_csv(*opt.data);
      for (auto& c : grid.cells) c.data = opt.data->string();
    }
    ensure_dir(opt.out);
    const auto suite = backtest::run_experiment_suite(grid, opt.jobs, data);

    int code = kOk;
    auto failures = open_out(opt.out / "failures.txt");
    for (std::size_t i = 0; i < suite.cells.size(); ++i) {
      const auto& cell = suite.cells[i];
      if (!cell.report) {
        failures << grid.cells[i].name << " category=" << cell.error_category << " message=" << cell.error << '\n';
        if (code == kOk) code = exit_code_for(cell.error_category);
        continue;
      }
      const auto path = write_run_files(*cell.report, opt.out);
      std::ifstream in(path);
      write_plot_data(backtest::parse_report(in), opt.out / "plots");
      log << "wrote " << path.string() << '\n';
    }
    {
      auto out = open_out(opt.out / "summary.csv");
      backtest::write_summary_table(out, suite);
    }
    {
      auto out = open_out(opt.out / "manifest.txt");
      write_manifest(out, {opt.config.value_or(fs::path{}), opt.data.value_or(fs::path{}), opt.out,
                           opt.seed.value_or(grid.cells.front().seed)},
                     "suite");
    }
    return code;
  });
}

int cmd_plotdata(const PlotOptions& opt, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    std::ifstream in(opt.report);
    if (!in) throw Error(ErrorCode::NotFound, "report " + opt.report.string() + " not found");
    const auto files = write_plot_data(backtest::parse_report(in), opt.out);
    for (const auto& f : files) log << "wrote " << f.string() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_generate(const GenerateOptions& opt, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const auto seed = derive_seed(opt.seed, "data");
    timeseries::PriceSeries series = [&] {
      if (opt.market == "sine") return backtest::sine_market(opt.bars, seed);
      if (opt.market == "trend") return backtest::trend_market(opt.bars, seed);
      if (opt.market == "jump") return backtest::jump_market(opt.bars, seed);
      throw Error(ErrorCode::Usage, "unknown market '" + opt.market + "'");
    }();
    if (opt.out.has_parent_path()) ensure_dir(opt.out.parent_path());
    auto out = open_out(opt.out);
    timeseries::write_csv(out, series);
    log << "wrote " << opt.out.string() << " bars=" << series.size() << '\n';
    return static_cast<int>(kOk);
  });
}

int run(int argc, char** argv) {
  CLI::App app{"Recurrent reinforcement learning trading engine"};
  app.require_subcommand(1);

  TrainOptions train;
  std::string train_data;
  std::uint64_t train_seed = 0;
  auto* train_cmd = app.add_subcommand("train", "train one agent and backtest it");
  train_cmd->add_option("--config", train.config, "experiment config file")->required();
  auto* train_data_opt = train_cmd->add_option("--data", train_data, "price CSV (timestamp,price)");
  train_cmd->add_option("--out", train.out, "output directory");
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "override the config seed");

  SuiteOptions suite;
  std::string suite_preset, suite_data, suite_config;
  std::uint64_t suite_seed = 0;
  auto* suite_cmd = app.add_subcommand("suite", "run an experiment grid");
  auto* preset_opt = suite_cmd->add_option("--preset", suite_preset, "bias | lstm-vs-rrl | ddr-vs-sharpe | paper-v")
                         ->check(CLI::IsMember({"bias", "lstm-vs-rrl", "ddr-vs-sharpe", "paper-v"}));
  auto* suite_config_opt = suite_cmd->add_option("--config", suite_config, "config with grid.<key> sweeps");
  auto* suite_data_opt = suite_cmd->add_option("--data", suite_data, "price CSV used by every cell");
  suite_cmd->add_option("--out", suite.out, "output directory");
  auto* suite_seed_opt = suite_cmd->add_option("--seed", suite_seed, "manifest seed");
  suite_cmd->add_option("--jobs", suite.jobs, "parallel cells")->check(CLI::PositiveNumber);

  PlotOptions plot;
  auto* plot_cmd = app.add_subcommand("plotdata", "emit per-panel CSVs from a report");
  plot_cmd->add_option("report", plot.report, "report file")->required();
  plot_cmd->add_option("--out", plot.out, "output directory");

  GenerateOptions gen;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic market as CSV");
  gen_cmd->add_option("--market", gen.market, "sine | trend | jump");
  gen_cmd->add_option("--bars", gen.bars, "number of bars");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  if (*train_cmd) {
    if (*train_data_opt) train.data = train_data;
    if (*train_seed_opt) train.seed = train_seed;
    return cmd_train(train, std::cout, std::cerr);
  }
  if (*suite_cmd) {
    if (*preset_opt) suite.preset = suite_preset;
    if (*suite_config_opt) suite.config = suite_config;
    if (*suite_data_opt) suite.data = suite_data;
    if (*suite_seed_opt) suite.seed = suite_seed;
    return cmd_suite(suite, std::cout, std::cerr);
  }
  if (*plot_cmd) return cmd_plotdata(plot, std::cout, std::cerr);
  return cmd_generate(gen, std::cout, std::cerr);
}

}  // namespace rrl::cli
