#pragma once

// Entropy-regularized training of ToyModel:
//   loss = mean over utterances of ( -log P(y|x) + lambda * H(alignments) )
// Arc-level gradients come from the lattice (posteriors for the likelihood,
// the outside pass for the entropy) and are pushed through the scorer.

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "alent/corpus.hpp"
#include "alent/entropy.hpp"
#include "alent/lattice.hpp"
#include "alent/model.hpp"
#include "alent/parallel.hpp"

namespace alent {

inline constexpr double kDefaultLambda = 0.01;

inline Lattice utterance_lattice(UtteranceScorer& scorer, std::span<const Label> labels,
                                 std::span<const std::size_t> contexts, LatticeKind kind) {
  const std::size_t T = scorer.num_frames();
  return build_lattice(kind, T, labels, [&](std::size_t t, std::size_t u, Label sym) {
    return scorer.log_prob(scoring_frame(kind, t, T), contexts[u], sym);
  });
}

inline EntropyReport utterance_entropy(const ToyModel& model, const Utterance& utt,
                                       LatticeKind kind) {
  UtteranceScorer scorer(model, utt.features);
  const auto ctx = scorer.codec().prefixes(utt.labels);
  return alignment_entropy(utterance_lattice(scorer, utt.labels, ctx, kind));
}

struct UtteranceLoss {
  double loss = 0.0;
  double nll = 0.0;
  double entropy = 0.0;
  double normalized_entropy = 0.0;
  ModelParams grad;  // gradient of `loss` (not averaged)
};

inline UtteranceLoss utterance_loss_and_grad(const ToyModel& model, const Utterance& utt,
                                             double lambda, LatticeKind kind) {
  UtteranceScorer scorer(model, utt.features);
  const auto ctx = scorer.codec().prefixes(utt.labels);
  const auto lat = utterance_lattice(scorer, utt.labels, ctx, kind);
  const auto eg = entropy_gradients(lat);
  const double max_h = log_num_paths(lat);

  UtteranceLoss out;
  out.nll = -eg.log_likelihood;
  out.entropy = eg.entropy;
  out.normalized_entropy = max_h > 0 ? eg.entropy / max_h : 0.0;
  out.loss = out.nll + lambda * eg.entropy;
  out.grad = ModelParams::zeros(model.config());

  // Output gradients grouped by (frame, context), in first-touch order.
  const std::size_t n_out = model.config().num_outputs();
  const std::size_t n_ctx = scorer.codec().count();
  const std::size_t T = utt.num_frames();
  std::unordered_map<std::size_t, std::size_t> slot_of;
  std::vector<std::size_t> keys;
  std::vector<double> g_out;
  const auto& arcs = lat.arcs();
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const double g = -eg.d_loglik[i] + lambda * eg.d_entropy[i];
    if (g == 0.0) continue;
    const auto& a = arcs[i];
    const std::size_t key = scoring_frame(kind, a.src.t, T) * n_ctx + ctx[a.src.u];
    auto [it, inserted] = slot_of.try_emplace(key, keys.size());
    if (inserted) {
      keys.push_back(key);
      g_out.resize(g_out.size() + n_out, 0.0);
    }
    g_out[it->second * n_out + static_cast<std::size_t>(a.symbol + 1)] += g;
  }

  const auto h = static_cast<std::size_t>(model.config().hidden);
  std::vector<double> d_proj(T * h, 0.0);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const std::size_t frame = keys[k] / n_ctx;
    model.backward(scorer.projection(frame), keys[k] % n_ctx,
                   std::span<const double>(g_out.data() + k * n_out, n_out), out.grad,
                   std::span<double>(d_proj.data() + frame * h, h));
  }
  model.backward_projection(utt.features, d_proj, out.grad);
  return out;
}

struct LossResult {
  double loss = 0.0;
  double mean_nll = 0.0;
  double mean_entropy = 0.0;
  double mean_normalized_entropy = 0.0;
  ModelParams grad;  // gradient of the batch-mean loss
};

/// Batch-mean loss and gradient. Per-utterance terms are reduced in batch
/// order, so results do not depend on `jobs`.
inline LossResult loss_and_grad(const ToyModel& model, std::span<const Utterance> batch,
                                double lambda, LatticeKind kind = LatticeKind::FrameDependent,
                                std::size_t jobs = 1) {
  if (lambda < 0) throw Error(ErrorCode::InvalidArgument, "lambda must be non-negative");
  std::vector<UtteranceLoss> parts(batch.size());
  parallel_for(batch.size(), jobs, [&](std::size_t i) {
    parts[i] = utterance_loss_and_grad(model, batch[i], lambda, kind);
  });

  LossResult r;
  r.grad = ModelParams::zeros(model.config());
  if (batch.empty()) return r;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& p : parts) {
    r.loss += p.loss;
    r.mean_nll += p.nll;
    r.mean_entropy += p.entropy;
    r.mean_normalized_entropy += p.normalized_entropy;
    r.grad.axpy(scale, p.grad);
  }
  r.loss *= scale;
  r.mean_nll *= scale;
  r.mean_entropy *= scale;
  r.mean_normalized_entropy *= scale;
  return r;
}

struct TrainConfig {
  double lambda = kDefaultLambda;
  std::size_t steps = 300;
  double step_size = 0.1;
  LatticeKind kind = LatticeKind::FrameDependent;
  std::size_t jobs = 1;
};

struct CurvePoint {
  std::size_t step = 0;
  double loss = 0.0;
  double mean_nll = 0.0;
  double mean_entropy = 0.0;
  double mean_normalized_entropy = 0.0;
};

struct TrainResult {
  ToyModel model;
  std::vector<CurvePoint> curve;  // metrics of the parameters each step started from
};

/// Full-batch gradient descent with a fixed step size.
inline TrainResult train(ToyModel model, std::span<const Utterance> corpus, const TrainConfig& cfg) {
  if (cfg.step_size <= 0) throw Error(ErrorCode::InvalidArgument, "step size must be positive");
  TrainResult out{std::move(model), {}};
  out.curve.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    auto r = loss_and_grad(out.model, corpus, cfg.lambda, cfg.kind, cfg.jobs);
    out.curve.push_back({step, r.loss, r.mean_nll, r.mean_entropy, r.mean_normalized_entropy});
    out.model.params().axpy(-cfg.step_size, r.grad);
  }
  return out;
}

}  // namespace alent
