#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "rrl/objectives.hpp"
#include "rrl/rrl_agent.hpp"
#include "rrl/text.hpp"
#include "rrl/timeseries.hpp"

namespace rrl::lstm {

using agent::TraderParams;
using objectives::CostModel;
using objectives::ObjectiveSpec;
using timeseries::FeatureWindow;

// Dense row-major matrix; the sizes here are tiny so no BLAS is involved.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  bool operator==(const Matrix&) const = default;
};

// Gate order used for storage, flattening and snapshots.
enum Gate : std::size_t { BlockInput = 0, InputGate = 1, ForgetGate = 2, OutputGate = 3 };
inline constexpr std::array<std::string_view, 4> kGateNames = {"y", "i", "f", "o"};

struct GateParams {
  Matrix W;  // hidden x input
  Matrix U;  // hidden x hidden
  std::vector<double> bias;

  bool operator==(const GateParams&) const = default;
};

struct LstmLayerParams {
  std::array<GateParams, 4> gates;

  static LstmLayerParams zeros(std::size_t input, std::size_t hidden);
  std::size_t input_size() const { return gates[0].W.cols; }
  std::size_t hidden_size() const { return gates[0].W.rows; }
  void validate() const;
  bool operator==(const LstmLayerParams&) const = default;
};

struct LayerState {
  std::vector<double> h;  // block output z^{t-1}
  std::vector<double> c;  // cell state c^{t-1}

  static LayerState zeros(std::size_t hidden) { return {std::vector<double>(hidden, 0.0), std::vector<double>(hidden, 0.0)}; }
};

using LstmState = std::vector<LayerState>;

// Everything the backward pass needs from one cell step.
struct CellCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> y, i, f, o, c, tanh_c;
};

struct CellOutput {
  std::vector<double> z;
  std::vector<double> c;
  CellCache cache;
};

CellOutput cell_forward(std::span<const double> x, const LayerState& prev, const LstmLayerParams& p);

enum class DropoutMode { Train, Eval };

struct DropoutSpec {
  double rate = 0.0;
  std::uint64_t seed = 0;
  DropoutMode mode = DropoutMode::Eval;
};

// i.i.d. Bernoulli(1 - rate) entries valued 1/(1 - rate), else 0. Deterministic
// in (seed, counter). Eval mode yields all ones. Throws InvalidRate unless
// 0 <= rate < 1.
std::vector<double> sample_mask(std::size_t size, const DropoutSpec& drop, std::uint64_t counter);

struct LstmTraderParams {
  std::vector<LstmLayerParams> layers;
  TraderParams head;  // input is the top block output

  void validate() const;
  bool operator==(const LstmTraderParams&) const = default;
};

// Weights uniform in +-1/sqrt(input + hidden), biases 0 except the forget gate at 1.
LstmTraderParams init_lstm_trader(std::size_t input, std::span<const std::size_t> hidden_sizes,
                                  std::uint64_t seed, double b_value, bool b_trainable);

// masks[t][l]: mask on the output of layer l at step t, applied where it feeds
// layer l+1 (or the trader head for the top layer). The recurrent path and the
// raw input window are never masked.
using DropoutMasks = std::vector<std::vector<std::vector<double>>>;

DropoutMasks sample_pass_masks(const LstmTraderParams& params, std::size_t steps, const DropoutSpec& drop,
                               std::uint64_t pass_counter);

struct StackPass {
  agent::PositionTrace trace;
  std::vector<FeatureWindow> head_inputs;     // masked top outputs, one per step
  std::vector<std::vector<CellCache>> caches;  // [t][l]
  LstmState final_state;
};

// Empty masks mean no dropout. initial may be empty for a zero start.
StackPass stack_forward(std::span<const FeatureWindow> seq, const LstmTraderParams& params,
                        const DropoutMasks& masks, const LstmState& initial = {}, double initial_position = 0.0);
StackPass stack_forward(std::span<const FeatureWindow> seq, const LstmTraderParams& params,
                        const DropoutSpec& drop, std::uint64_t pass_counter = 0);

struct LstmGradient {
  double objective = 0.0;
  std::vector<LstmLayerParams> layers;
  agent::TraderGradient head;
  std::vector<double> rewards;
  agent::PositionTrace trace;
};

// Exact gradient of the objective with the given masks held constant.
LstmGradient bptt_gradient(std::span<const FeatureWindow> seq, std::span<const double> returns,
                           const CostModel& cm, const ObjectiveSpec& spec, const LstmTraderParams& params,
                           const DropoutMasks& masks);

text::KeyValues to_snapshot(const LstmTraderParams& params, std::uint64_t seed);
LstmTraderParams from_snapshot(const text::KeyValues& kv);

}  // namespace rrl::lstm
