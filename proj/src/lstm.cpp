#include "rrl/lstm.hpp"

#include <cmath>
#include <string>

#include "rrl/error.hpp"
#include "rrl/random.hpp"

namespace rrl::lstm {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// out = W x + U h + b
void affine(const GateParams& g, std::span<const double> x, std::span<const double> h, std::vector<double>& out) {
  out.assign(g.bias.begin(), g.bias.end());
  for (std::size_t r = 0; r < g.W.rows; ++r) {
    double acc = out[r];
    const double* wr = &g.W.data[r * g.W.cols];
    for (std::size_t k = 0; k < g.W.cols; ++k) acc += wr[k] * x[k];
    const double* ur = &g.U.data[r * g.U.cols];
    for (std::size_t k = 0; k < g.U.cols; ++k) acc += ur[k] * h[k];
    out[r] = acc;
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

std::string gate_key(std::size_t layer, std::size_t gate, std::string_view part) {
  return "layer." + std::to_string(layer) + "." + std::string(kGateNames[gate]) + "." + std::string(part);
}

}  // namespace

LstmLayerParams LstmLayerParams::zeros(std::size_t input, std::size_t hidden) {
  LstmLayerParams p;
  for (auto& g : p.gates) {
    g.W = Matrix(hidden, input);
    g.U = Matrix(hidden, hidden);
    g.bias.assign(hidden, 0.0);
  }
  return p;
}

void LstmLayerParams::validate() const {
  const auto in = input_size();
  const auto hid = hidden_size();
  require(hid > 0, "LSTM layer has no hidden units");
  for (const auto& g : gates) {
    require(g.W.rows == hid && g.W.cols == in && g.W.data.size() == hid * in, "inconsistent input weights");
    require(g.U.rows == hid && g.U.cols == hid && g.U.data.size() == hid * hid, "inconsistent recurrent weights");
    require(g.bias.size() == hid, "inconsistent gate bias");
  }
}

void LstmTraderParams::validate() const {
  require(!layers.empty(), "LSTM trader needs at least one layer");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    if (l > 0) require(layers[l].input_size() == layers[l - 1].hidden_size(), "layer sizes do not chain");
  }
  require(head.m() == layers.back().hidden_size(), "trader head size differs from top hidden size");
}

CellOutput cell_forward(std::span<const double> x, const LayerState& prev, const LstmLayerParams& p) {
  const auto hid = p.hidden_size();
  require(x.size() == p.input_size(), "cell input size mismatch");
  require(prev.h.size() == hid && prev.c.size() == hid, "cell state size mismatch");

  CellOutput out;
  auto& k = out.cache;
  k.x.assign(x.begin(), x.end());
  k.h_prev = prev.h;
  k.c_prev = prev.c;
  affine(p.gates[BlockInput], x, prev.h, k.y);
  affine(p.gates[InputGate], x, prev.h, k.i);
  affine(p.gates[ForgetGate], x, prev.h, k.f);
  affine(p.gates[OutputGate], x, prev.h, k.o);
  k.c.resize(hid);
  k.tanh_c.resize(hid);
  out.z.resize(hid);
  for (std::size_t j = 0; j < hid; ++j) {
    k.y[j] = std::tanh(k.y[j]);
    k.i[j] = sigmoid(k.i[j]);
    k.f[j] = sigmoid(k.f[j]);
    k.o[j] = sigmoid(k.o[j]);
    k.c[j] = k.i[j] * k.y[j] + k.f[j] * prev.c[j];
    k.tanh_c[j] = std::tanh(k.c[j]);
    out.z[j] = k.o[j] * k.tanh_c[j];
  }
  out.c = k.c;
  return out;
}

std::vector<double> sample_mask(std::size_t size, const DropoutSpec& drop, std::uint64_t counter) {
  if (!(drop.rate >= 0.0) || !(drop.rate < 1.0)) {
    throw Error(ErrorCode::InvalidRate, "dropout rate must lie in [0, 1)");
  }
  std::vector<double> mask(size, 1.0);
  if (drop.mode == DropoutMode::Eval || drop.rate == 0.0) return mask;
  Rng rng(derive_seed(drop.seed, counter));
  const double keep = 1.0 / (1.0 - drop.rate);
  for (auto& v : mask) v = rng.canonical() < drop.rate ? 0.0 : keep;
  return mask;
}

LstmTraderParams init_lstm_trader(std::size_t input, std::span<const std::size_t> hidden_sizes,
                                  std::uint64_t seed, double b_value, bool b_trainable) {
  if (hidden_sizes.empty()) throw Error(ErrorCode::InvalidConfig, "LSTM needs at least one layer");
  LstmTraderParams p;
  Rng rng(derive_seed(seed, "lstm.layers"));
  std::size_t in = input;
  for (auto hid : hidden_sizes) {
    if (hid == 0) throw Error(ErrorCode::InvalidConfig, "LSTM hidden size must be positive");
    auto layer = LstmLayerParams::zeros(in, hid);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in + hid));
    for (std::size_t g = 0; g < 4; ++g) {
      for (auto& v : layer.gates[g].W.data) v = rng.uniform(-bound, bound);
      for (auto& v : layer.gates[g].U.data) v = rng.uniform(-bound, bound);
    }
    layer.gates[ForgetGate].bias.assign(hid, 1.0);
    p.layers.push_back(std::move(layer));
    in = hid;
  }
  p.head = agent::init_trader(in, derive_seed(seed, "lstm.head"), b_value, b_trainable);
  return p;
}

DropoutMasks sample_pass_masks(const LstmTraderParams& params, std::size_t steps, const DropoutSpec& drop,
                               std::uint64_t pass_counter) {
  DropoutMasks masks(steps);
  const std::uint64_t base = derive_seed(drop.seed, pass_counter);
  std::uint64_t draw = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    masks[t].reserve(params.layers.size());
    for (const auto& layer : params.layers) {
      masks[t].push_back(sample_mask(layer.hidden_size(), DropoutSpec{drop.rate, base, drop.mode}, draw++));
    }
  }
  return masks;
}

StackPass stack_forward(std::span<const FeatureWindow> seq, const LstmTraderParams& params,
                        const DropoutMasks& masks, const LstmState& initial, double initial_position) {
  params.validate();
  const auto L = params.layers.size();
  require(masks.empty() || masks.size() == seq.size(), "dropout masks do not cover the sequence");

  LstmState state = initial;
  if (state.empty()) {
    for (const auto& layer : params.layers) state.push_back(LayerState::zeros(layer.hidden_size()));
  }
  require(state.size() == L, "initial state has the wrong number of layers");

  StackPass pass;
  pass.caches.resize(seq.size());
  pass.head_inputs.resize(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    std::vector<double> input = seq[t].values;
    pass.caches[t].reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
      auto cell = cell_forward(input, state[l], params.layers[l]);
      state[l].h = cell.z;
      state[l].c = cell.c;
      input = std::move(cell.z);
      if (!masks.empty()) {
        const auto& mk = masks[t][l];
        require(mk.size() == input.size(), "dropout mask size mismatch");
        for (std::size_t j = 0; j < input.size(); ++j) input[j] *= mk[j];
      }
      pass.caches[t].push_back(std::move(cell.cache));
    }
    pass.head_inputs[t].values = std::move(input);
  }

  // The head is the plain trader run over the (masked) top outputs.
  pass.trace = agent::forward(params.head, pass.head_inputs, initial_position);
  pass.final_state = std::move(state);
  return pass;
}

StackPass stack_forward(std::span<const FeatureWindow> seq, const LstmTraderParams& params,
                        const DropoutSpec& drop, std::uint64_t pass_counter) {
  if (drop.mode == DropoutMode::Eval || drop.rate == 0.0) {
    if (!(drop.rate >= 0.0 && drop.rate < 1.0)) throw Error(ErrorCode::InvalidRate, "dropout rate must lie in [0, 1)");
    return stack_forward(seq, params, DropoutMasks{});
  }
  return stack_forward(seq, params, sample_pass_masks(params, seq.size(), drop, pass_counter));
}

LstmGradient bptt_gradient(std::span<const FeatureWindow> seq, std::span<const double> returns,
                           const CostModel& cm, const ObjectiveSpec& spec, const LstmTraderParams& params,
                           const DropoutMasks& masks) {
  require(seq.size() == returns.size(), "sequence and returns are not aligned");
  auto pass = stack_forward(seq, params, masks);
  const auto T = seq.size();
  const auto L = params.layers.size();
  const auto& F = pass.trace.positions;
  const auto& head = params.head;

  LstmGradient out;
  out.rewards = objectives::trading_returns(F, returns, cm);
  out.objective = objectives::objective_value(out.rewards, spec);
  const auto dS_dR = objectives::objective_gradient(out.rewards, spec);
  const auto partials = agent::reward_partials(pass.trace, returns, cm);

  out.head.w.assign(head.m(), 0.0);
  for (const auto& layer : params.layers) {
    out.layers.push_back(LstmLayerParams::zeros(layer.input_size(), layer.hidden_size()));
  }

  // Carries from step t+1 into step t.
  double carry_F = 0.0;  // dS/dF_t contributed by R_{t+1} and a_{t+1}
  std::vector<std::vector<double>> carry_h(L), carry_c(L);
  for (std::size_t l = 0; l < L; ++l) {
    carry_h[l].assign(params.layers[l].hidden_size(), 0.0);
    carry_c[l].assign(params.layers[l].hidden_size(), 0.0);
  }

  std::vector<double> da[4];
  for (std::size_t t = T; t-- > 0;) {
    // Trader head: F_{t+1} = tanh(a), a = w.x + b + u F_t in trace indexing.
    const double f = F[t + 1];
    const double f_prev = F[t];
    const double gF = dS_dR[t] * partials[t].d_current + carry_F;
    const double ga = gF * (1.0 - f * f);
    const auto& x_head = pass.head_inputs[t].values;
    for (std::size_t i = 0; i < head.m(); ++i) out.head.w[i] += ga * x_head[i];
    out.head.b += ga;
    out.head.u += ga * f_prev;
    carry_F = dS_dR[t] * partials[t].d_previous + ga * head.u;

    // Gradient w.r.t. the (unmasked) output of each layer, top down.
    std::vector<double> dz(head.m());
    for (std::size_t i = 0; i < head.m(); ++i) dz[i] = ga * head.w[i];
    for (std::size_t l = L; l-- > 0;) {
      const auto& p = params.layers[l];
      const auto& k = pass.caches[t][l];
      auto& g = out.layers[l];
      const auto hid = p.hidden_size();
      const auto in = p.input_size();
      if (!masks.empty()) {
        for (std::size_t j = 0; j < hid; ++j) dz[j] *= masks[t][l][j];
      }
      for (std::size_t j = 0; j < hid; ++j) dz[j] += carry_h[l][j];

      for (auto& v : da) v.assign(hid, 0.0);
      std::vector<double> dc_prev(hid);
      for (std::size_t j = 0; j < hid; ++j) {
        const double d_o = dz[j] * k.tanh_c[j];
        const double dc = dz[j] * k.o[j] * (1.0 - k.tanh_c[j] * k.tanh_c[j]) + carry_c[l][j];
        da[BlockInput][j] = dc * k.i[j] * (1.0 - k.y[j] * k.y[j]);
        da[InputGate][j] = dc * k.y[j] * k.i[j] * (1.0 - k.i[j]);
        da[ForgetGate][j] = dc * k.c_prev[j] * k.f[j] * (1.0 - k.f[j]);
        da[OutputGate][j] = d_o * k.o[j] * (1.0 - k.o[j]);
        dc_prev[j] = dc * k.f[j];
      }

      std::vector<double> dx(in, 0.0);
      std::vector<double> dh_prev(hid, 0.0);
      for (std::size_t gi = 0; gi < 4; ++gi) {
        const auto& pg = p.gates[gi];
        auto& gg = g.gates[gi];
        for (std::size_t r = 0; r < hid; ++r) {
          const double d = da[gi][r];
          if (d == 0.0) continue;
          gg.bias[r] += d;
          for (std::size_t c = 0; c < in; ++c) {
            gg.W(r, c) += d * k.x[c];
            dx[c] += pg.W(r, c) * d;
          }
          for (std::size_t c = 0; c < hid; ++c) {
            gg.U(r, c) += d * k.h_prev[c];
            dh_prev[c] += pg.U(r, c) * d;
          }
        }
      }
      carry_h[l] = std::move(dh_prev);
      carry_c[l] = std::move(dc_prev);
      dz = std::move(dx);  // flows into the output of layer l-1 at step t
    }
  }
  out.trace = std::move(pass.trace);
  return out;
}

text::KeyValues to_snapshot(const LstmTraderParams& params, std::uint64_t seed) {
  text::KeyValues kv;
  kv.set("layers", std::to_string(params.layers.size()));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& p = params.layers[l];
    kv.set("layer." + std::to_string(l) + ".input", std::to_string(p.input_size()));
    kv.set("layer." + std::to_string(l) + ".hidden", std::to_string(p.hidden_size()));
    for (std::size_t g = 0; g < 4; ++g) {
      const auto& gp = p.gates[g];
      for (std::size_t i = 0; i < gp.W.rows; ++i)
        for (std::size_t j = 0; j < gp.W.cols; ++j)
          kv.set(gate_key(l, g, "W." + std::to_string(i) + "." + std::to_string(j)), gp.W(i, j));
      for (std::size_t i = 0; i < gp.U.rows; ++i)
        for (std::size_t j = 0; j < gp.U.cols; ++j)
          kv.set(gate_key(l, g, "U." + std::to_string(i) + "." + std::to_string(j)), gp.U(i, j));
      for (std::size_t i = 0; i < gp.bias.size(); ++i) kv.set(gate_key(l, g, "b." + std::to_string(i)), gp.bias[i]);
    }
  }
  const auto head = agent::to_snapshot(params.head, seed, "head.");
  for (const auto& [k, v] : head.entries()) kv.set(k, v);
  kv.set("seed", std::to_string(seed));
  return kv;
}

LstmTraderParams from_snapshot(const text::KeyValues& kv) {
  LstmTraderParams p;
  const auto L = kv.get_int_or("layers", 0);
  if (L <= 0) throw Error(ErrorCode::ParseError, "snapshot has no LSTM layers");
  for (std::int64_t l = 0; l < L; ++l) {
    const auto ls = std::to_string(l);
    const auto in = static_cast<std::size_t>(kv.get_int_or("layer." + ls + ".input", 0));
    const auto hid = static_cast<std::size_t>(kv.get_int_or("layer." + ls + ".hidden", 0));
    auto layer = LstmLayerParams::zeros(in, hid);
    for (std::size_t g = 0; g < 4; ++g) {
      auto& gp = layer.gates[g];
      const auto lu = static_cast<std::size_t>(l);
      for (std::size_t i = 0; i < hid; ++i)
        for (std::size_t j = 0; j < in; ++j)
          gp.W(i, j) = kv.get_double(gate_key(lu, g, "W." + std::to_string(i) + "." + std::to_string(j)));
      for (std::size_t i = 0; i < hid; ++i)
        for (std::size_t j = 0; j < hid; ++j)
          gp.U(i, j) = kv.get_double(gate_key(lu, g, "U." + std::to_string(i) + "." + std::to_string(j)));
      for (std::size_t i = 0; i < hid; ++i) gp.bias[i] = kv.get_double(gate_key(lu, g, "b." + std::to_string(i)));
    }
    p.layers.push_back(std::move(layer));
  }
  p.head = agent::from_snapshot(kv, "head.");
  p.validate();
  return p;
}

}  // namespace rrl::lstm
