#pragma once

// Brute-force oracles and random instance generators shared by the tests.
// Oracles work in plain or long-double arithmetic and avoid the library's
// semiring code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "alent/corpus.hpp"
#include "alent/lattice.hpp"
#include "alent/model.hpp"

namespace alent::test {

inline long double lse(const std::vector<long double>& xs) {
  long double mx = -INFINITY;
  for (auto x : xs) mx = std::max(mx, x);
  if (mx == -INFINITY) return mx;
  long double s = 0;
  for (auto x : xs) s += std::exp(x - mx);
  return mx + std::log(s);
}

/// Shannon entropy of the normalized path weights.
inline double brute_entropy(const std::vector<WeightedPath>& paths) {
  std::vector<long double> w;
  for (const auto& p : paths) w.push_back(p.weight);
  const long double z = lse(w);
  long double h = 0;
  for (auto x : w) {
    const long double p = std::exp(x - z);
    if (p > 0) h -= p * std::log(p);
  }
  return static_cast<double>(h);
}

inline double brute_log_total(const std::vector<WeightedPath>& paths) {
  std::vector<long double> w;
  for (const auto& p : paths) w.push_back(p.weight);
  return static_cast<double>(lse(w));
}

/// Entropy from the accumulator recursion with the alpha_prev factor dropped
/// from the log-weight term: A(dst) += w * (A(src) + log w). Plain domain.
inline double dropped_alpha_entropy(const Lattice& lat) {
  std::vector<long double> alpha(lat.num_states(), 0), acc(lat.num_states(), 0);
  alpha[lat.initial()] = 1;
  for (std::size_t i = 0; i < lat.arcs().size(); ++i) {
    const long double lw = lat.arcs()[i].weight;
    const long double w = std::exp(lw);
    const auto s = lat.src_index(i), d = lat.dst_index(i);
    alpha[d] += alpha[s] * w;
    acc[d] += w * (acc[s] + lw);
  }
  const auto f = lat.final_state();
  return static_cast<double>(std::log(alpha[f]) - acc[f] / alpha[f]);
}

/// Lattice of labels 0..U-1 with independent uniform(lo, hi) arc log-weights.
inline Lattice random_lattice(std::mt19937_64& rng, LatticeKind kind, std::size_t T, std::size_t U,
                              double lo = -3.0, double hi = 0.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::map<std::tuple<std::size_t, std::size_t, Label>, double> w;
  return build_lattice(kind, T, U, [&](std::size_t t, std::size_t u, Label s) {
    auto [it, fresh] = w.try_emplace({t, u, s}, 0.0);
    if (fresh) it->second = d(rng);
    return it->second;
  });
}

/// Central finite differences of f around x.
inline std::vector<double> finite_diff(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

inline FeatureMatrix random_features(std::mt19937_64& rng, std::size_t T, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  FeatureMatrix x(T, d);
  for (auto& v : x.data) v = n(rng);
  return x;
}

/// Small model with parameters large enough that decodes are not all ties.
inline ToyModel random_model(std::mt19937_64& rng, int vocab, int context, int feature_dim,
                             double scale = 1.0) {
  ModelConfig cfg;
  cfg.vocab = vocab;
  cfg.context = context;
  cfg.feature_dim = feature_dim;
  cfg.hidden = 6;
  return ToyModel::random_init(cfg, rng(), scale);
}

// Exhaustive (y, pi) enumeration straight from the model's local outputs.
struct JointPath {
  std::vector<Label> labels;
  std::vector<PathStep> steps;
  double score = 0.0;
};

inline std::vector<JointPath> enumerate_joint(const ToyModel& m, const FeatureMatrix& x,
                                              LatticeKind kind, std::size_t max_labels) {
  const std::size_t T = x.frames;
  const auto V = m.config().vocab;
  const auto proj = m.project(x);
  const auto h = static_cast<std::size_t>(m.config().hidden);
  const auto base = static_cast<std::size_t>(V) + 1;
  std::size_t count = 1;
  for (int i = 0; i < m.config().context; ++i) count *= base;
  const auto lp = [&](std::size_t frame, const std::vector<Label>& hist, Label s) {
    // Context index: the last c labels, padded with V, oldest most significant.
    std::size_t k = 0;
    for (int i = m.config().context; i > 0; --i) {
      const auto pos = static_cast<std::ptrdiff_t>(hist.size()) - i;
      k = k * base + (pos < 0 ? static_cast<std::size_t>(V) : static_cast<std::size_t>(hist[pos]));
    }
    std::vector<double> out(base);
    m.log_probs(std::span<const double>(proj.data() + frame * h, h), k, out);
    return out[static_cast<std::size_t>(s + 1)];
  };

  std::vector<JointPath> all;
  JointPath cur;
  const auto rec = [&](auto&& self, std::size_t t) -> void {
    if (kind == LatticeKind::FrameDependent) {
      if (t == T) {
        all.push_back(cur);
        return;
      }
      for (Label s = kEpsilon; s < V; ++s) {
        if (s != kEpsilon && cur.labels.size() >= max_labels) continue;
        auto saved = cur;
        cur.score += lp(t, cur.labels, s);
        cur.steps.push_back({t, s});
        if (s != kEpsilon) cur.labels.push_back(s);
        self(self, t + 1);
        cur = saved;
      }
    } else {
      if (t == T) all.push_back(cur);
      for (Label s = kEpsilon; s < V; ++s) {
        if (s == kEpsilon && t == T) continue;
        if (s != kEpsilon && cur.labels.size() >= max_labels) continue;
        const std::size_t frame = std::min(t, T - 1);
        auto saved = cur;
        cur.score += lp(frame, cur.labels, s);
        cur.steps.push_back({frame, s});
        if (s != kEpsilon) cur.labels.push_back(s);
        self(self, s == kEpsilon ? t + 1 : t);
        cur = saved;
      }
    }
  };
  rec(rec, 0);
  return all;
}

}  // namespace alent::test
