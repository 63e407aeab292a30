#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "rrl/cli.hpp"
#include "rrl/error.hpp"

namespace fs = std::filesystem;
using namespace rrl;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rrl_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const auto path = dir / "run.conf";
  std::ofstream(path) << body;
  return path;
}

const char* kSmall =
    "[experiment]\n"
    "name = small\n"
    "data = synthetic:sine\n"
    "train_len = 200\n"
    "test_len = 100\n"
    "epochs = 20\n"
    "seed = 3\n";

int run_tool(const std::string& args) {
  const std::string cmd = std::string(RRL_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("exit codes by category") {
  CHECK(cli::exit_code_for("io.not_found") == 2);
  CHECK(cli::exit_code_for("data.non_monotone") == 2);
  CHECK(cli::exit_code_for("numeric.non_finite_objective") == 3);
  CHECK(cli::exit_code_for("config.unknown_key") == 1);
  CHECK(cli::exit_code_for("usage") == 1);
}

TEST_CASE("train writes a report") {
  const auto dir = scratch("train");
  cli::TrainOptions opt;
  opt.config = write_config(dir, kSmall);
  opt.out = dir / "out";
  std::ostringstream log, err;
  CHECK(cli::cmd_train(opt, log, err) == 0);
  CHECK(err.str().empty());
  CHECK(fs::exists(dir / "out" / "small.report"));
  CHECK(fs::exists(dir / "out" / "small.params"));
  CHECK(fs::exists(dir / "out" / "manifest.txt"));
}

TEST_CASE("missing data file") {
  const auto dir = scratch("missing");
  cli::TrainOptions opt;
  opt.config = write_config(dir, kSmall);
  opt.data = dir / "nope.csv";
  opt.out = dir / "out";
  std::ostringstream log, err;
  CHECK(cli::cmd_train(opt, log, err) == 2);
  CHECK(err.str().find("category=io.not_found") != std::string::npos);

  CHECK(run_tool("train --config " + opt.config.string() + " --data " + opt.data->string() + " --out " +
                 (dir / "out2").string()) == 2);
  CHECK(run_tool("train --config " + (dir / "absent.conf").string()) == 2);
}

TEST_CASE("usage errors") {
  CHECK(run_tool("") == 1);
  CHECK(run_tool("train") == 1);
  CHECK(run_tool("suite --preset nonsense --out /tmp/rrl_cli_test_nonsense") == 1);
  const auto dir = scratch("badkey");
  const auto conf = write_config(dir, std::string(kSmall) + "bogus = 1\n");
  CHECK(run_tool("train --config " + conf.string() + " --out " + (dir / "out").string()) == 1);
}

TEST_CASE("same seed gives byte-identical reports") {
  const auto dir = scratch("seed");
  const auto conf = write_config(dir, kSmall);
  for (const char* sub : {"a", "b"}) {
    cli::TrainOptions opt;
    opt.config = conf;
    opt.out = dir / sub;
    opt.seed = 7;
    std::ostringstream log, err;
    REQUIRE(cli::cmd_train(opt, log, err) == 0);
  }
  CHECK(slurp(dir / "a" / "small.report") == slurp(dir / "b" / "small.report"));
  CHECK(slurp(dir / "a" / "small.params") == slurp(dir / "b" / "small.params"));
  CHECK(slurp(dir / "a" / "small.report").find("seed=7") != std::string::npos);

  REQUIRE(run_tool("train --config " + conf.string() + " --seed 7 --out " + (dir / "c").string()) == 0);
  CHECK(slurp(dir / "a" / "small.report") == slurp(dir / "c" / "small.report"));
}

TEST_CASE("report matches direct module output") {
  const auto dir = scratch("golden");
  cli::TrainOptions opt;
  opt.config = write_config(dir, kSmall);
  opt.out = dir / "out";
  std::ostringstream log, err;
  REQUIRE(cli::cmd_train(opt, log, err) == 0);

  std::ifstream in(opt.config);
  const auto cfg = backtest::config_from_key_values(text::parse_sectioned(in));
  const auto report = backtest::run_experiment(cfg);
  std::ostringstream direct;
  backtest::write_report(direct, report, "small.params");
  CHECK(slurp(dir / "out" / "small.report") == direct.str());
}

TEST_CASE("train on a csv file") {
  const auto dir = scratch("csv");
  cli::GenerateOptions gen;
  gen.market = "trend";
  gen.bars = 400;
  gen.seed = 2;
  gen.out = dir / "trend.csv";
  std::ostringstream log, err;
  REQUIRE(cli::cmd_generate(gen, log, err) == 0);
  const auto series = timeseries::load_csv(gen.out);
  CHECK(series.size() == 400);
  backtest::ExperimentConfig cfg;
  cfg.data = "synthetic:trend";
  cfg.seed = 2;
  cfg.train_len = 200;
  cfg.test_len = 200;
  const auto direct = backtest::load_market(cfg);
  CHECK(std::ranges::equal(series.prices(), direct.prices()));

  cli::TrainOptions opt;
  opt.config = write_config(dir, kSmall);
  opt.data = gen.out;
  opt.out = dir / "out";
  CHECK(cli::cmd_train(opt, log, err) == 0);

  gen.market = "brownian";
  CHECK(cli::cmd_generate(gen, log, err) == 1);
}

TEST_CASE("suite from a config grid") {
  const auto dir = scratch("grid");
  cli::SuiteOptions opt;
  opt.config = write_config(dir, std::string(kSmall) + "[grid]\nexperiment.objective = sharpe|ddr\ncost.c = 0|0.001\n");
  opt.out = dir / "out";
  opt.jobs = 2;
  std::ostringstream log, err;
  REQUIRE(cli::cmd_suite(opt, log, err) == 0);
  for (int i = 0; i < 4; ++i) CHECK(fs::exists(dir / "out" / ("small_" + std::to_string(i) + ".report")));
  std::ifstream summary(dir / "out" / "summary.csv");
  std::size_t rows = 0;
  for (std::string line; std::getline(summary, line);) rows += line.rfind("small_", 0) == 0;
  CHECK(rows == 4);

  opt.config = write_config(dir, kSmall);
  std::ostringstream err2;
  CHECK(cli::cmd_suite(opt, log, err2) == 1);
  CHECK(err2.str().find("category=usage") != std::string::npos);
  CHECK_THROWS_AS(cli::grid_from_config(opt.config->string(), std::nullopt), Error);
}

TEST_CASE("suite reports failed cells") {
  const auto dir = scratch("partial");
  cli::SuiteOptions opt;
  opt.config = write_config(dir, std::string(kSmall) + "[grid]\nexperiment.data = synthetic:sine|" +
                                     (dir / "missing.csv").string() + "\n");
  opt.out = dir / "out";
  std::ostringstream log, err;
  CHECK(cli::cmd_suite(opt, log, err) == 2);
  CHECK(fs::exists(dir / "out" / "small_0.report"));
  CHECK(slurp(dir / "out" / "failures.txt").find("io.not_found") != std::string::npos);
}

TEST_CASE("bias preset and plot data") {
  const auto dir = scratch("bias");
  cli::SuiteOptions opt;
  opt.preset = "bias";
  opt.out = dir / "out";
  opt.jobs = 2;
  std::ostringstream log, err;
  REQUIRE(cli::cmd_suite(opt, log, err) == 0);
  std::size_t reports = 0;
  for (const auto& e : fs::directory_iterator(dir / "out"))
    if (e.path().extension() == ".report") ++reports;
  CHECK(reports == 2);

  std::ifstream summary(dir / "out" / "summary.csv");
  std::string text((std::istreambuf_iterator<char>(summary)), {});
  CHECK(text.find("comparison") != std::string::npos);

  fs::path report;
  for (const auto& e : fs::directory_iterator(dir / "out"))
    if (e.path().extension() == ".report") report = e.path();
  cli::PlotOptions plot;
  plot.report = report;
  plot.out = dir / "plots";
  std::ostringstream plog;
  REQUIRE(cli::cmd_plotdata(plot, plog, err) == 0);
  const auto stem = report.stem().string();
  for (const char* split : {"train", "test"}) {
    const auto base = dir / "plots" / (stem + "." + split);
    const auto n = line_count(base.string() + ".price.csv");
    CHECK(n > 1);
    CHECK(line_count(base.string() + ".signal.csv") == n);
    CHECK(line_count(base.string() + ".pnl.csv") == n);
  }
  CHECK(fs::exists(dir / "plots" / (stem + ".objective.csv")));
  std::ifstream obj(dir / "plots" / (stem + ".objective.csv"));
  std::string header;
  std::getline(obj, header);
  CHECK(header == "epoch,value");

  plot.report = dir / "absent.report";
  std::ostringstream perr;
  CHECK(cli::cmd_plotdata(plot, plog, perr) == 2);
  CHECK(perr.str().find("category=io.not_found") != std::string::npos);

  std::ofstream(dir / "junk.report") << "not a report\n";
  plot.report = dir / "junk.report";
  CHECK(cli::cmd_plotdata(plot, plog, perr) != 0);
}

TEST_CASE("bundled configs and data") {
  const fs::path root = RRL_SOURCE_DIR;
  std::size_t configs = 0;
  for (const auto& e : fs::directory_iterator(root / "configs")) {
    if (e.path().extension() != ".conf") continue;
    ++configs;
    std::ifstream in(e.path());
    const auto kv = text::parse_sectioned(in);
    bool has_grid = false;
    for (const auto& [k, v] : kv.entries()) has_grid = has_grid || k.rfind("grid.", 0) == 0;
    INFO(e.path().string());
    if (has_grid)
      CHECK(cli::grid_from_config(e.path(), std::nullopt).cells.size() > 1);
    else
      CHECK_NOTHROW(backtest::config_from_key_values(kv));
  }
  CHECK(configs >= 4);

  for (const char* market : {"sine", "trend", "jump"}) {
    const auto bundled = timeseries::load_csv(root / "data" / (std::string(market) + ".csv"));
    backtest::ExperimentConfig cfg;
    cfg.data = std::string("synthetic:") + market;
    cfg.seed = 1;
    const auto generated = backtest::load_market(cfg);
    CHECK(std::ranges::equal(bundled.prices(), generated.prices()));
    CHECK(std::ranges::equal(bundled.timestamps(), generated.timestamps()));
  }
}
