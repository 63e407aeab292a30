#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../lstm_oracle.hpp"
#include "../oracles.hpp"
#include "rrl/backtest.hpp"
#include "rrl/lstm.hpp"
#include "rrl/optim.hpp"
#include "rrl/rrl_agent.hpp"

namespace fs = std::filesystem;
using namespace rrl;
using objectives::ObjectiveKind;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::vector<double> trader_theta(const agent::TraderParams& p) {
  std::vector<double> th = p.w;
  th.push_back(p.b);
  th.push_back(p.u);
  return th;
}

Outcome rrl_gradients() {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> n01;
  double worst0 = 0.0, worst_c = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t T = std::uniform_int_distribution<std::size_t>(5, 200)(gen);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 16)(gen);
    const double c = inst % 2 == 0 ? 0.0 : 0.002;
    const auto kind = inst % 4 < 2 ? ObjectiveKind::Sharpe : ObjectiveKind::DownsideDeviation;
    std::vector<std::vector<double>> rows;
    std::vector<timeseries::FeatureWindow> windows;
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> row(m);
      for (auto& v : row) v = n01(gen);
      rows.push_back(row);
      windows.push_back({row});
    }
    const auto returns = oracle::random_vector(gen, T, -1.0, 1.0);
    agent::TraderParams p;
    p.w = oracle::random_vector(gen, m, -0.5, 0.5);
    p.b = std::uniform_real_distribution<double>(-0.3, 0.3)(gen);
    p.u = std::uniform_real_distribution<double>(-0.8, 0.8)(gen);
    objectives::ObjectiveSpec spec;
    spec.kind = kind;
    const auto g = agent::batch_gradient(p, windows, returns, objectives::CostModel{1.0, c}, spec);
    const auto objective = [&](const std::vector<double>& th) {
      const auto R = oracle::rewards(oracle::trader_positions(th, rows), returns, 1.0, c);
      return kind == ObjectiveKind::Sharpe ? oracle::sharpe(R) : oracle::ddr(R);
    };
    const auto fd = oracle::central_diff(objective, trader_theta(p), 1e-6);
    std::vector<double> analytic = g.gradient.w;
    analytic.push_back(g.gradient.b);
    analytic.push_back(g.gradient.u);
    const double err = oracle::norm_rel_error(analytic, fd);
    (c == 0.0 ? worst0 : worst_c) = std::max(c == 0.0 ? worst0 : worst_c, err);
  }
  return {worst0 <= 1e-5 && worst_c <= 1e-4,
          "50 instances, max rel err c=0 " + fmt(worst0) + " (<=1e-5), c>0 " + fmt(worst_c) + " (<=1e-4)"};
}

lstm::LstmTraderParams random_lstm(std::mt19937_64& gen, std::size_t in, const std::vector<std::size_t>& hidden) {
  lstm::LstmTraderParams p;
  std::uniform_real_distribution<double> d(-0.6, 0.6);
  std::size_t prev = in;
  for (auto h : hidden) {
    auto layer = lstm::LstmLayerParams::zeros(prev, h);
    for (auto& g : layer.gates) {
      for (auto& v : g.W.data) v = d(gen);
      for (auto& v : g.U.data) v = d(gen);
      for (auto& v : g.bias) v = d(gen);
    }
    p.layers.push_back(std::move(layer));
    prev = h;
  }
  p.head.w = oracle::random_vector(gen, prev, -1.0, 1.0);
  p.head.b = 0.1;
  p.head.u = 0.3;
  return p;
}

Outcome lstm_gradients() {
  const std::size_t T = 20, m = 3;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 gen(seed);
    const std::vector<std::size_t> hidden = seed % 2 == 0 ? std::vector<std::size_t>{4} : std::vector<std::size_t>{3, 2};
    const auto p = random_lstm(gen, m, hidden);
    std::vector<std::vector<double>> seq;
    std::vector<timeseries::FeatureWindow> windows;
    for (std::size_t t = 0; t < T; ++t) {
      seq.push_back(oracle::random_vector(gen, m, -1.5, 1.5));
      windows.push_back({seq.back()});
    }
    const auto returns = oracle::random_vector(gen, T, -1.0, 1.0);
    const double c = seed % 3 == 0 ? 0.001 : 0.0;
    objectives::ObjectiveSpec spec;
    spec.kind = seed % 4 == 1 ? ObjectiveKind::DownsideDeviation : ObjectiveKind::Sharpe;
    const objectives::CostModel cm{1.0, c};
    for (bool with_masks : {false, true}) {
      lstm::DropoutMasks masks;
      if (with_masks) masks = lstm::sample_pass_masks(p, T, lstm::DropoutSpec{0.55, seed, lstm::DropoutMode::Train}, 0);
      const auto g = lstm::bptt_gradient(windows, returns, cm, spec, p, masks);
      const auto fd = oracle::central_diff(
          [&](const std::vector<double>& x) {
            return oracle::oracle_objective(optim::unflatten(x, p), seq, returns, masks, c, spec.kind);
          },
          optim::flatten(p), 1e-6);
      worst = std::max(worst, oracle::norm_rel_error(optim::flatten(g), fd));
    }
  }
  return {worst <= 1e-4, "20 seeds x {no mask, 0.55 mask}, max rel err " + fmt(worst) + " (<=1e-4)"};
}

Outcome objective_oracles() {
  std::mt19937_64 gen(77);
  double worst = 0.0;
  const auto rel = [](double a, double b) { return std::fabs(a - b) / std::max(std::fabs(b), 1e-300); };
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 300)(gen);
    auto r = oracle::random_vector(gen, n, -1.0, 1.0);
    r[0] = -0.5;
    r[1] = 0.25;
    worst = std::max(worst, rel(objectives::sharpe_ratio(r), oracle::sharpe(r)));
    worst = std::max(worst, rel(objectives::ddr(r, {}).value, oracle::ddr(r)));
    std::vector<double> equity(n);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) equity[k] = acc += r[k];
    const double dd = oracle::max_drawdown(equity);
    worst = std::max(worst, dd == 0.0 ? std::fabs(objectives::max_drawdown(equity)) : rel(objectives::max_drawdown(equity), dd));
  }
  return {worst <= 1e-10, "1000 series, max rel err " + fmt(worst) + " (<=1e-10)"};
}

Outcome sine_learning() {
  backtest::ExperimentGrid grid;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    backtest::ExperimentConfig c;
    c.name = "sine_" + std::to_string(seed);
    c.data = "synthetic:sine";
    c.seed = seed;
    grid.cells.push_back(c);
  }
  const auto suite = backtest::run_experiment_suite(grid, jobs());
  int good = 0;
  std::string detail;
  for (const auto& cell : suite.cells) {
    if (!cell.report) continue;
    const auto& t = cell.report->test;
    if (t.total_profit > 0.0 && t.sharpe > 0.0) ++good;
    detail += " " + fmt(t.sharpe);
  }
  return {good >= 4, std::to_string(good) + "/5 seeds with test profit > 0 and Sharpe > 0; test Sharpe" + detail};
}

Outcome bias_experiment() {
  backtest::ExperimentGrid grid;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto g = backtest::preset_grid("bias", seed);
    grid.cells.insert(grid.cells.end(), g.cells.begin(), g.cells.end());
  }
  const auto suite = backtest::run_experiment_suite(grid, jobs());
  int good = 0;
  std::string detail;
  for (std::size_t i = 0; i + 1 < suite.cells.size(); i += 2) {
    const auto& b1 = suite.cells[i].report;
    const auto& b5 = suite.cells[i + 1].report;
    if (!b1 || !b5) continue;
    const auto n1 = b1->test.trades.trade_count, n5 = b5->test.trades.trade_count;
    if (3 * n5 <= n1) ++good;
    detail += " " + std::to_string(n1) + "/" + std::to_string(n5);
  }
  return {good == 5, std::to_string(good) + "/5 seeds with trades(b=5) <= trades(b=1)/3; b1/b5 trades" + detail};
}

Outcome ddr_protection() {
  backtest::ExperimentGrid grid;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto g = backtest::preset_grid("ddr-vs-sharpe", seed);
    grid.cells.insert(grid.cells.end(), g.cells.begin(), g.cells.end());
  }
  const auto suite = backtest::run_experiment_suite(grid, jobs());
  int good = 0;
  std::string detail;
  for (std::size_t i = 0; i + 1 < suite.cells.size(); i += 2) {
    const auto& a = suite.cells[i].report;
    const auto& b = suite.cells[i + 1].report;
    if (!a || !b) continue;
    const auto& sharpe = a->config.objective.kind == ObjectiveKind::Sharpe ? a : b;
    const auto& ddr = a->config.objective.kind == ObjectiveKind::Sharpe ? b : a;
    if (ddr->test.max_drawdown <= sharpe->test.max_drawdown) ++good;
    detail += " " + fmt(ddr->test.max_drawdown) + "/" + fmt(sharpe->test.max_drawdown);
  }
  return {good >= 4, std::to_string(good) + "/5 seeds with DDR drawdown <= Sharpe drawdown; ddr/sharpe" + detail};
}

Outcome optimizer_benchmarks() {
  optim::ObjectiveFunction rosen;
  rosen.dim = 2;
  rosen.value = [](std::span<const double> x, std::size_t) {
    return 100.0 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1.0 - x[0]) * (1.0 - x[0]);
  };
  optim::NmConfig nm;
  nm.max_iters = 500;
  const auto r = optim::nelder_mead(rosen, {-1.2, 1.0}, nm);
  const double nm_err = std::max(std::fabs(r.x[0] - 1.0), std::fabs(r.x[1] - 1.0));
  bool ok = nm_err <= 1e-4 && r.iterations <= 500;

  optim::ObjectiveFunction sphere;
  sphere.dim = 10;
  sphere.value = [](std::span<const double> x, std::size_t) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return -s;
  };
  int es_ok = 0;
  std::vector<double> sigmas;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    optim::EsConfig es;
    es.seed = seed;
    es.max_iters = 300;
    std::mt19937_64 gen(seed);
    const auto e = optim::evolution_strategy(sphere, oracle::random_vector(gen, 10, -5.0, 5.0), es);
    const double sigma = e.trace.back().sigma;
    sigmas.push_back(sigma);
    if (-e.fx < 1e-6 && sigma < es.sigma0 / 10.0 && e.generations <= 300) ++es_ok;
  }
  ok = ok && es_ok == 5;
  return {ok, "NM Rosenbrock err " + fmt(nm_err) + " in " + std::to_string(r.iterations) + " iters; ES " +
                  std::to_string(es_ok) + "/5 seeds f<1e-6 with median sigma < sigma0/10 (worst sigma " +
                  fmt(*std::max_element(sigmas.begin(), sigmas.end())) + ")"};
}

double weight_norm(const backtest::AgentParams& p) {
  double s = 0.0;
  for (double w : std::get<agent::TraderParams>(p).w) s += w * w;
  return std::sqrt(s);
}

Outcome weight_decay() {
  int good = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    backtest::ExperimentConfig c;
    c.seed = seed;
    c.data = "synthetic:trend";
    const auto data = backtest::load_market(c);
    const auto train_split = backtest::split(data, c.train_len, c.test_len).first;
    const auto plain = backtest::train(c, train_split);
    c.weight_decay = 0.01;
    const auto decayed = backtest::train(c, train_split);
    const double a = weight_norm(plain.params), b = weight_norm(decayed.params);
    if (b < a) ++good;
    detail += " " + fmt(b) + "<" + fmt(a);
  }
  return {good == 5, std::to_string(good) + "/5 seeds with smaller |w| under decay;" + detail};
}

Outcome invariance() {
  std::mt19937_64 gen(5);
  double scale_err = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto r = oracle::random_vector(gen, 50, -1.0, 1.0);
    for (double k : {1e-3, 0.5, 7.0, 1e4}) {
      std::vector<double> kr(r);
      for (auto& v : kr) v *= k;
      const double s = objectives::sharpe_ratio(r), d = objectives::ddr(r, {}).value;
      scale_err = std::max(scale_err, std::fabs(objectives::sharpe_ratio(kr) - s) / std::fabs(s));
      scale_err = std::max(scale_err, std::fabs(objectives::ddr(kr, {}).value - d) / std::fabs(d));
    }
  }
  const bool scale_ok = scale_err <= 1e-10;

  bool lookahead_ok = true, bound_ok = true, determinism_ok = true;
  for (auto kind : {backtest::AgentKind::PlainRRL, backtest::AgentKind::LstmRRL}) {
    backtest::ExperimentConfig c;
    c.agent = kind;
    c.hidden = {4};
    c.dropout = kind == backtest::AgentKind::LstmRRL ? 0.3 : 0.0;
    c.train_len = 400;
    c.test_len = 400;
    c.epochs = 30;
    c.seed = 11;
    const auto data = backtest::load_market(c);
    const auto [train_split, test_split] = backtest::split(data, c.train_len, c.test_len);
    const auto trained = backtest::train(c, train_split);
    const auto full = backtest::evaluate(trained.params, test_split, c, trained.standardizer);
    for (std::size_t k = c.window + 1; k < test_split.size(); k += 37) {
      const auto part = backtest::evaluate(trained.params, test_split.slice(0, k + 1), c, trained.standardizer);
      for (std::size_t i = 0; i <= k; ++i) lookahead_ok = lookahead_ok && part.positions[i] == full.positions[i];
    }
    for (double f : full.positions) bound_ok = bound_ok && std::fabs(f) < 1.0;

    std::ostringstream a, b;
    backtest::write_report(a, backtest::run_experiment(c), "x.params");
    backtest::write_report(b, backtest::run_experiment(c), "x.params");
    determinism_ok = determinism_ok && a.str() == b.str();
  }
  // Saturated pre-activations still stay strictly inside (-1, 1) for moderate inputs.
  agent::TraderParams big{{3.0, -2.0}, 5.0, 0.9};
  std::vector<timeseries::FeatureWindow> x{{{1.0, -1.0}}, {{2.0, 0.5}}, {{-3.0, 3.0}}};
  for (double f : agent::forward(big, x).positions) bound_ok = bound_ok && std::fabs(f) < 1.0;

  return {scale_ok && lookahead_ok && bound_ok && determinism_ok,
          "scale rel err " + fmt(scale_err) + ", no look-ahead " + (lookahead_ok ? "ok" : "VIOLATED") +
              ", determinism " + (determinism_ok ? "ok" : "VIOLATED") + ", |F|<1 " + (bound_ok ? "ok" : "VIOLATED")};
}

std::size_t data_rows(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++n;
  return n == 0 ? 0 : n - 1;
}

Outcome end_to_end() {
  const auto out = fs::temp_directory_path() / "rrl_acceptance_paper_v";
  fs::remove_all(out);
  const std::string cmd = std::string(RRL_TOOL_PATH) + " suite --preset paper-v --jobs " + std::to_string(jobs()) +
                          " --out " + out.string() + " > " + (out.string() + ".log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::vector<fs::path> reports;
  if (fs::is_directory(out))
    for (const auto& e : fs::directory_iterator(out))
      if (e.path().extension() == ".report") reports.push_back(e.path());
  bool rows_ok = !reports.empty();
  for (const auto& rp : reports) {
    std::ifstream in(rp);
    const auto parsed = backtest::parse_report(in);
    const auto cfg = backtest::config_from_key_values(parsed.config);
    const auto stem = rp.stem().string();
    for (const auto& [split, len] : {std::pair<std::string, std::size_t>{"train", cfg.train_len}, {"test", cfg.test_len}})
      for (const char* panel : {".price.csv", ".signal.csv", ".pnl.csv"})
        rows_ok = rows_ok && data_rows(out / "plots" / (stem + "." + split + panel)) == len;
    rows_ok = rows_ok && data_rows(out / "plots" / (stem + ".objective.csv")) == parsed.table("objective_trace")->rows.size();
  }
  return {code == 0 && reports.size() == 6 && rows_ok,
          "exit " + std::to_string(code) + ", " + std::to_string(reports.size()) + " reports, panel rows " +
              (rows_ok ? "match split lengths" : "MISMATCH")};
}

struct Criterion {
  int number;
  const char* name;
  double limit_seconds;  // 0: no stated limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "RRL gradient vs finite differences", 30, rrl_gradients},
      {2, "LSTM BPTT gradient vs finite differences", 60, lstm_gradients},
      {3, "objective oracles", 0, objective_oracles},
      {4, "learning on the sine market", 120, sine_learning},
      {5, "bias term reduces trading", 120, bias_experiment},
      {6, "DDR drawdown protection on the jump market", 0, ddr_protection},
      {7, "optimizer benchmarks", 0, optimizer_benchmarks},
      {8, "weight decay shrinks weights", 0, weight_decay},
      {9, "invariance suite", 0, invariance},
      {10, "end-to-end paper-v suite", 300, end_to_end},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.limit_seconds == 0 || secs <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.number << ": " << c.name << " - " << o.detail << " ["
              << fmt(secs) << " s" << (c.limit_seconds > 0 ? ", limit " + fmt(c.limit_seconds) + " s" : std::string())
              << (in_time ? "" : ", OVER TIME LIMIT") << "]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
