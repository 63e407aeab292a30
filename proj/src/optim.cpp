#include "rrl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "rrl/error.hpp"
#include "rrl/random.hpp"

namespace rrl::optim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double finite_or_inf(double v) { return std::isfinite(v) ? v : kInf; }

void require_size(std::span<const double> x, std::size_t n) {
  if (x.size() != n) {
    throw Error(ErrorCode::DimensionMismatch,
                "parameter vector has " + std::to_string(x.size()) + " entries, expected " + std::to_string(n));
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace

ObjectiveFunction negate(ObjectiveFunction f) {
  ObjectiveFunction g;
  g.dim = f.dim;
  g.value = [v = f.value](std::span<const double> x, std::size_t it) { return -v(x, it); };
  if (f.value_and_gradient) {
    g.value_and_gradient = [vg = f.value_and_gradient](std::span<const double> x, std::span<double> grad,
                                                       std::size_t it) {
      const double v = vg(x, grad, it);
      for (auto& d : grad) d = -d;
      return -v;
    };
  }
  return g;
}

void AscentConfig::validate() const {
  if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0 && weight_decay < 1.0) || epochs < 1) {
    throw Error(ErrorCode::InvalidConfig, "ascent requires rho >= 0, 0 <= nu < 1 and epochs >= 1");
  }
}

void NmConfig::validate() const {
  if (!(reflection > 0.0) || !(expansion > 1.0) || !(contraction > 0.0 && contraction < 1.0) ||
      !(shrink > 0.0 && shrink < 1.0) || !(tolerance >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "invalid Nelder-Mead coefficients");
  }
}

void EsConfig::validate() const {
  if (mu < 1 || lambda < mu || !(sigma0 > 0.0) || !(tau >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "evolution strategy requires 1 <= mu <= lambda and sigma0 > 0");
  }
}

AscentResult gradient_ascent(const ObjectiveFunction& f, std::vector<double> x0, const AscentConfig& cfg) {
  cfg.validate();
  if (!f.has_gradient()) throw Error(ErrorCode::InvalidConfig, "gradient ascent needs an analytic gradient");
  require_size(x0, f.dim);
  if (!cfg.frozen.empty() && cfg.frozen.size() != f.dim) {
    throw Error(ErrorCode::DimensionMismatch, "frozen mask length differs from the parameter count");
  }

  AscentResult out;
  out.x = std::move(x0);
  out.trace.reserve(cfg.epochs);
  std::vector<double> grad(f.dim);
  const double keep = 1.0 - cfg.weight_decay;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    const double value = f.value_and_gradient(out.x, grad, epoch);
    double norm_sq = 0.0;
    for (std::size_t k = 0; k < f.dim; ++k) {
      if (!cfg.frozen.empty() && cfg.frozen[k]) grad[k] = 0.0;
      norm_sq += grad[k] * grad[k];
    }
    if (!std::isfinite(value) || !std::isfinite(norm_sq)) {
      out.aborted = true;
      break;
    }
    out.trace.push_back(value);
    const double norm = std::sqrt(norm_sq);
    const double scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;
    for (std::size_t k = 0; k < f.dim; ++k) {
      if (!cfg.frozen.empty() && cfg.frozen[k]) continue;
      out.x[k] = out.x[k] * keep + cfg.learning_rate * scale * grad[k];
    }
  }
  return out;
}

NmResult nelder_mead(const ObjectiveFunction& f, std::vector<double> x0, const NmConfig& cfg) {
  cfg.validate();
  const std::size_t n = f.dim;
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "Nelder-Mead needs at least one dimension");
  require_size(x0, n);

  NmResult out;
  std::size_t evals = 0;
  auto eval = [&](const std::vector<double>& x) {
    ++evals;
    return finite_or_inf(f.value(x, evals - 1));
  };

  std::vector<std::vector<double>> simplex(n + 1, x0);
  for (std::size_t i = 0; i < n; ++i) simplex[i + 1][i] += std::max(0.05 * std::abs(x0[i]), 0.00025);
  std::vector<double> fv(n + 1);
  for (std::size_t j = 0; j <= n; ++j) fv[j] = eval(simplex[j]);

  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> s2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      s2[k] = std::move(simplex[order[k]]);
      f2[k] = fv[order[k]];
    }
    simplex = std::move(s2);
    fv = std::move(f2);
  };
  auto blend = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = a[i] + t * (b[i] - a[i]);
    return p;
  };

  std::size_t iter = 0;
  for (;; ++iter) {
    sort_simplex();
    double mean_f = 0.0;
    for (double v : fv) mean_f += v;
    out.trace.push_back({iter, fv[0], mean_f / static_cast<double>(n + 1), 0.0});

    double x_spread = 0.0;
    for (std::size_t j = 1; j <= n; ++j)
      for (std::size_t i = 0; i < n; ++i) x_spread = std::max(x_spread, std::abs(simplex[j][i] - simplex[0][i]));
    const double f_spread = fv[n] - fv[0];
    if (f_spread <= cfg.tolerance && x_spread <= cfg.tolerance) {
      out.converged = true;
      break;
    }
    if (iter >= cfg.max_iters) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[j][i] / static_cast<double>(n);

    // Points along the ray from the centroid through the worst vertex.
    const auto xr = blend(centroid, simplex[n], -cfg.reflection);
    const double fr = eval(xr);
    if (fr < fv[0]) {
      const auto xe = blend(centroid, xr, cfg.expansion);
      const double fe = eval(xe);
      if (fe < fr) {
        simplex[n] = xe;
        fv[n] = fe;
      } else {
        simplex[n] = xr;
        fv[n] = fr;
      }
      continue;
    }
    if (fr < fv[n - 1]) {
      simplex[n] = xr;
      fv[n] = fr;
      continue;
    }
    if (fr < fv[n]) {
      const auto xc = blend(centroid, xr, cfg.contraction);
      const double fc = eval(xc);
      if (fc <= fr) {
        simplex[n] = xc;
        fv[n] = fc;
        continue;
      }
    } else {
      const auto xc = blend(centroid, simplex[n], cfg.contraction);
      const double fc = eval(xc);
      if (fc < fv[n]) {
        simplex[n] = xc;
        fv[n] = fc;
        continue;
      }
    }
    for (std::size_t j = 1; j <= n; ++j) {
      simplex[j] = blend(simplex[0], simplex[j], cfg.shrink);
      fv[j] = eval(simplex[j]);
    }
  }
  out.x = simplex[0];
  out.fx = fv[0];
  out.iterations = iter;
  out.evaluations = evals;
  return out;
}

EsResult evolution_strategy(const ObjectiveFunction& f, std::vector<double> x0, const EsConfig& cfg) {
  cfg.validate();
  const std::size_t n = f.dim;
  require_size(x0, n);
  const double tau = cfg.tau > 0.0 ? cfg.tau : 1.0 / std::sqrt(2.0 * static_cast<double>(n));
  Rng rng(derive_seed(cfg.seed, "es"));

  struct Individual {
    std::vector<double> x;
    double sigma = 0.0;
    double fitness = 0.0;
  };
  std::vector<Individual> parents(cfg.mu, Individual{x0, cfg.sigma0, 0.0});

  EsResult out;
  out.x = x0;
  out.fx = f.value(x0, 0);
  if (!std::isfinite(out.fx)) out.fx = -kInf;

  std::vector<Individual> offspring;
  offspring.reserve(cfg.lambda);
  for (std::size_t gen = 0; gen < cfg.max_iters; ++gen) {
    offspring.clear();
    for (std::size_t k = 0; k < cfg.lambda; ++k) {
      const auto& parent = parents[static_cast<std::size_t>(rng.canonical() * static_cast<double>(parents.size()))];
      Individual child;
      child.sigma = parent.sigma * std::exp(tau * rng.normal());
      child.x.resize(n);
      for (std::size_t i = 0; i < n; ++i) child.x[i] = parent.x[i] + child.sigma * rng.normal();
      child.fitness = f.value(child.x, gen + 1);
      if (!std::isfinite(child.fitness)) {
        ++out.discarded;
        continue;
      }
      offspring.push_back(std::move(child));
    }
    if (!offspring.empty()) {
      std::stable_sort(offspring.begin(), offspring.end(),
                       [](const Individual& a, const Individual& b) { return a.fitness > b.fitness; });
      if (offspring.front().fitness > out.fx) {
        out.fx = offspring.front().fitness;
        out.x = offspring.front().x;
      }
      const auto keep = std::min(cfg.mu, offspring.size());
      parents.assign(std::make_move_iterator(offspring.begin()),
                     std::make_move_iterator(offspring.begin() + static_cast<std::ptrdiff_t>(keep)));
    }
    double mean_f = 0.0;
    std::vector<double> sigmas;
    for (const auto& p : parents) {
      mean_f += p.fitness;
      sigmas.push_back(p.sigma);
    }
    out.trace.push_back({gen, out.fx, mean_f / static_cast<double>(parents.size()), median(sigmas)});
    out.generations = gen + 1;
  }
  for (const auto& p : parents) out.final_sigmas.push_back(p.sigma);
  return out;
}

std::vector<double> flatten(const agent::TraderParams& p) {
  std::vector<double> x(p.w);
  x.push_back(p.b);
  x.push_back(p.u);
  return x;
}

agent::TraderParams unflatten(std::span<const double> x, const agent::TraderParams& shape) {
  require_size(x, shape.m() + 2);
  agent::TraderParams p = shape;
  std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(shape.m()), p.w.begin());
  p.b = x[shape.m()];
  p.u = x[shape.m() + 1];
  return p;
}

std::vector<double> flatten(const agent::TraderGradient& g) {
  std::vector<double> x(g.w);
  x.push_back(g.b);
  x.push_back(g.u);
  return x;
}

namespace {

template <typename Layers>
void append_layers(const Layers& layers, std::vector<double>& x) {
  for (const auto& layer : layers) {
    for (const auto& g : layer.gates) {
      x.insert(x.end(), g.W.data.begin(), g.W.data.end());
      x.insert(x.end(), g.U.data.begin(), g.U.data.end());
      x.insert(x.end(), g.bias.begin(), g.bias.end());
    }
  }
}

std::size_t lstm_size(const lstm::LstmTraderParams& p) {
  std::size_t n = p.head.m() + 2;
  for (const auto& layer : p.layers)
    for (const auto& g : layer.gates) n += g.W.data.size() + g.U.data.size() + g.bias.size();
  return n;
}

}  // namespace

std::vector<double> flatten(const lstm::LstmTraderParams& p) {
  std::vector<double> x;
  x.reserve(lstm_size(p));
  append_layers(p.layers, x);
  const auto head = flatten(p.head);
  x.insert(x.end(), head.begin(), head.end());
  return x;
}

std::vector<double> flatten(const lstm::LstmGradient& g) {
  std::vector<double> x;
  append_layers(g.layers, x);
  const auto head = flatten(g.head);
  x.insert(x.end(), head.begin(), head.end());
  return x;
}

lstm::LstmTraderParams unflatten(std::span<const double> x, const lstm::LstmTraderParams& shape) {
  require_size(x, lstm_size(shape));
  lstm::LstmTraderParams p = shape;
  std::size_t k = 0;
  auto take = [&](std::vector<double>& dst) {
    std::copy(x.begin() + static_cast<std::ptrdiff_t>(k), x.begin() + static_cast<std::ptrdiff_t>(k + dst.size()),
              dst.begin());
    k += dst.size();
  };
  for (auto& layer : p.layers) {
    for (auto& g : layer.gates) {
      take(g.W.data);
      take(g.U.data);
      take(g.bias);
    }
  }
  p.head = unflatten(x.subspan(k), shape.head);
  return p;
}

std::size_t bias_index(const agent::TraderParams& p) { return p.m(); }

std::size_t bias_index(const lstm::LstmTraderParams& p) { return lstm_size(p) - 2; }

}  // namespace rrl::optim
