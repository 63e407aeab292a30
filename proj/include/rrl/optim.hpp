#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rrl/lstm.hpp"
#include "rrl/rrl_agent.hpp"

namespace rrl::optim {

// Fitness over a flat parameter vector. `iteration` lets stochastic pieces
// (dropout masks) vary per epoch while staying a pure function of its inputs.
struct ObjectiveFunction {
  using ValueFn = std::function<double(std::span<const double> x, std::size_t iteration)>;
  using GradientFn = std::function<double(std::span<const double> x, std::span<double> grad, std::size_t iteration)>;

  std::size_t dim = 0;
  ValueFn value;
  GradientFn value_and_gradient;  // optional

  bool has_gradient() const { return static_cast<bool>(value_and_gradient); }
};

// Same function with the sign flipped, for handing a maximization problem to a minimizer.
ObjectiveFunction negate(ObjectiveFunction f);

// One row per iteration: (iteration, best_f, mean_f, sigma).
struct TraceRow {
  std::size_t iteration = 0;
  double best = 0.0;
  double mean = 0.0;
  double sigma = 0.0;
};

struct AscentConfig {
  double learning_rate = 0.1;  // rho
  double weight_decay = 0.0;   // nu
  std::size_t epochs = 100;
  double clip_norm = 10.0;     // <= 0 disables clipping
  std::uint64_t seed = 0;
  std::vector<bool> frozen;    // coordinates that are neither updated nor decayed

  void validate() const;
};

struct AscentResult {
  std::vector<double> x;
  std::vector<double> trace;  // objective at the start of each epoch
  bool aborted = false;       // non-finite objective or gradient; x is the last good iterate
};

// Maximizes f: x <- x (1 - nu) + rho clip(grad f(x)).
AscentResult gradient_ascent(const ObjectiveFunction& f, std::vector<double> x0, const AscentConfig& cfg);

struct NmConfig {
  double reflection = 1.0;
  double expansion = 2.0;
  double contraction = 0.5;
  double shrink = 0.5;
  double tolerance = 1e-8;  // on both the f-spread and the vertex spread
  std::size_t max_iters = 1000;

  void validate() const;
};

struct NmResult {
  std::vector<double> x;
  double fx = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;  // false: max_iters reached, x is the best vertex so far
  std::vector<TraceRow> trace;
};

// Minimizes f. Initial simplex: x0 plus, per coordinate, max(0.05 |x0_i|, 0.00025).
NmResult nelder_mead(const ObjectiveFunction& f, std::vector<double> x0, const NmConfig& cfg);

struct EsConfig {
  std::size_t mu = 5;
  std::size_t lambda = 20;
  double sigma0 = 1.0;
  double tau = 0.0;  // 0 selects 1/sqrt(2n)
  std::size_t max_iters = 300;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EsResult {
  std::vector<double> x;  // best ever evaluated
  double fx = 0.0;
  std::size_t generations = 0;
  std::size_t discarded = 0;  // offspring with a non-finite fitness
  std::vector<TraceRow> trace;  // best is the best-so-far value; sigma the population median
  std::vector<double> final_sigmas;
};

// (mu, lambda) evolution strategy maximizing f with log-normal step-size
// self-adaptation: sigma' = sigma exp(tau N(0,1)), x' = x + sigma' N(0, I).
EsResult evolution_strategy(const ObjectiveFunction& f, std::vector<double> x0, const EsConfig& cfg);

// Stable orderings:
//   trader: w_0..w_{m-1}, b, u
//   LSTM trader: per layer, per gate (y, i, f, o): W row-major, U row-major,
//   bias; then the head in trader order.
std::vector<double> flatten(const agent::TraderParams& p);
agent::TraderParams unflatten(std::span<const double> x, const agent::TraderParams& shape);
std::vector<double> flatten(const lstm::LstmTraderParams& p);
lstm::LstmTraderParams unflatten(std::span<const double> x, const lstm::LstmTraderParams& shape);

std::vector<double> flatten(const agent::TraderGradient& g);
std::vector<double> flatten(const lstm::LstmGradient& g);

// Index of the head bias b in the flat vector of shape p.
std::size_t bias_index(const agent::TraderParams& p);
std::size_t bias_index(const lstm::LstmTraderParams& p);

}  // namespace rrl::optim
