#pragma once

#include <vector>

#include "oracles.hpp"
#include "rrl/lstm.hpp"

namespace oracle {

inline ScalarLstm to_oracle(const rrl::lstm::LstmLayerParams& p) {
  ScalarLstm o;
  const auto hid = p.hidden_size(), in = p.input_size();
  o.W.assign(4, std::vector<std::vector<double>>(hid, std::vector<double>(in)));
  o.U.assign(4, std::vector<std::vector<double>>(hid, std::vector<double>(hid)));
  o.bias.assign(4, std::vector<double>(hid));
  for (std::size_t g = 0; g < 4; ++g)
    for (std::size_t j = 0; j < hid; ++j) {
      for (std::size_t k = 0; k < in; ++k) o.W[g][j][k] = p.gates[g].W(j, k);
      for (std::size_t k = 0; k < hid; ++k) o.U[g][j][k] = p.gates[g].U(j, k);
      o.bias[g][j] = p.gates[g].bias[j];
    }
  return o;
}

// Head inputs of the stacked network computed with the scalar oracle.
inline std::vector<std::vector<double>> oracle_features(const rrl::lstm::LstmTraderParams& p, const std::vector<std::vector<double>>& seq,
                                                 const rrl::lstm::DropoutMasks& masks) {
  std::vector<ScalarLstm> cells;
  std::vector<std::vector<double>> h, c;
  for (const auto& layer : p.layers) {
    cells.push_back(to_oracle(layer));
    h.emplace_back(layer.hidden_size(), 0.0);
    c.emplace_back(layer.hidden_size(), 0.0);
  }
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    std::vector<double> x = seq[t];
    for (std::size_t l = 0; l < cells.size(); ++l) {
      cells[l].step(x, h[l], c[l]);
      x = h[l];
      if (!masks.empty())
        for (std::size_t j = 0; j < x.size(); ++j) x[j] *= masks[t][l][j];
    }
    out.push_back(x);
  }
  return out;
}

inline double oracle_objective(const rrl::lstm::LstmTraderParams& p, const std::vector<std::vector<double>>& seq,
                        const std::vector<double>& returns, const rrl::lstm::DropoutMasks& masks, double c, rrl::objectives::ObjectiveKind kind) {
  const auto feats = oracle_features(p, seq, masks);
  std::vector<double> theta = p.head.w;
  theta.push_back(p.head.b);
  theta.push_back(p.head.u);
  const auto F = trader_positions(theta, feats);
  const auto R = rewards(F, returns, 1.0, c);
  return kind == rrl::objectives::ObjectiveKind::Sharpe ? sharpe(R) : ddr(R);
}

}  // namespace oracle
