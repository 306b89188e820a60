#pragma once

// Toy locally normalized scorer with HAT factorization and finite label context.
//
// For frame t and label context k (the last c emitted labels):
//   g       = tanh(P^T window(x, t) + E[k])
//   b       = w_b . g + b_b
//   s       = W_l^T g + b_l
//   log P(eps)   = log sigmoid(b)
//   log P(label) = log sigmoid(-b) + log_softmax(s)[label]
// so the V+1 outputs of every (t, k) sum to one.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alent/error.hpp"
#include "alent/lattice.hpp"
#include "alent/numerics.hpp"

namespace alent {

/// Row-major frames x dim feature matrix.
struct FeatureMatrix {
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t frames_, std::size_t dim_)
      : frames(frames_), dim(dim_), data(frames_ * dim_, 0.0) {}

  std::span<const double> row(std::size_t t) const { return {data.data() + t * dim, dim}; }
  std::span<double> row(std::size_t t) { return {data.data() + t * dim, dim}; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;
};

struct ModelConfig {
  int vocab = 4;         // V, not counting epsilon
  int context = 2;       // c
  int feature_dim = 8;   // d
  int hidden = 16;
  int left = 1;          // left frames in the input window
  int right = 1;         // right frames in the input window; 0 means streaming

  std::size_t num_outputs() const { return static_cast<std::size_t>(vocab) + 1; }
  std::size_t num_contexts() const {
    std::size_t n = 1;
    for (int i = 0; i < context; ++i) n *= num_outputs();
    return n;
  }
  std::size_t window_frames() const { return static_cast<std::size_t>(left + right + 1); }
  std::size_t window_dim() const { return window_frames() * static_cast<std::size_t>(feature_dim); }

  void validate() const {
    if (vocab < 1 || context < 0 || feature_dim < 1 || hidden < 1 || left < 0 || right < 0)
      throw Error(ErrorCode::InvalidArgument, "invalid model configuration");
    if (context > 6) throw Error(ErrorCode::InvalidArgument, "context size too large");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Label context encoded base (V+1), oldest symbol most significant, padding
// symbol V for positions before the first label.
class ContextCodec {
 public:
  explicit ContextCodec(const ModelConfig& cfg)
      : base_(cfg.num_outputs()), count_(cfg.num_contexts()) {}

  std::size_t count() const noexcept { return count_; }
  std::size_t initial() const noexcept { return count_ - 1; }
  std::size_t extend(std::size_t ctx, Label label) const noexcept {
    return (ctx * base_ + static_cast<std::size_t>(label)) % count_;
  }

  /// Context after emitting every label in `history`.
  std::size_t of(std::span<const Label> history) const noexcept {
    std::size_t k = initial();
    for (auto l : history) k = extend(k, l);
    return k;
  }

  /// Context after each prefix y_{1:u}, u = 0..U.
  std::vector<std::size_t> prefixes(std::span<const Label> labels) const {
    std::vector<std::size_t> out{initial()};
    for (auto l : labels) out.push_back(extend(out.back(), l));
    return out;
  }

 private:
  std::size_t base_;
  std::size_t count_;
};

struct ModelParams {
  std::vector<double> ctx_embed;  // num_contexts x hidden
  std::vector<double> feat_proj;  // window_dim x hidden
  std::vector<double> blank_w;    // hidden
  std::vector<double> blank_b;    // 1
  std::vector<double> label_w;    // hidden x V
  std::vector<double> label_b;    // V

  static ModelParams zeros(const ModelConfig& cfg) {
    const auto h = static_cast<std::size_t>(cfg.hidden);
    const auto v = static_cast<std::size_t>(cfg.vocab);
    ModelParams p;
    p.ctx_embed.assign(cfg.num_contexts() * h, 0.0);
    p.feat_proj.assign(cfg.window_dim() * h, 0.0);
    p.blank_w.assign(h, 0.0);
    p.blank_b.assign(1, 0.0);
    p.label_w.assign(h * v, 0.0);
    p.label_b.assign(v, 0.0);
    return p;
  }

  template <class Fn>
  void for_each_block(Fn&& fn) {
    fn("ctx_embed", ctx_embed);
    fn("feat_proj", feat_proj);
    fn("blank_w", blank_w);
    fn("blank_b", blank_b);
    fn("label_w", label_w);
    fn("label_b", label_b);
  }
  template <class Fn>
  void for_each_block(Fn&& fn) const {
    const_cast<ModelParams&>(*this).for_each_block(
        [&](const char* name, std::vector<double>& b) { fn(name, std::as_const(b)); });
  }

  std::size_t size() const {
    std::size_t n = 0;
    for_each_block([&](const char*, const std::vector<double>& b) { n += b.size(); });
    return n;
  }

  /// this += scale * other
  void axpy(double scale, const ModelParams& other) {
    auto src = other.flat_blocks();
    std::size_t i = 0;
    for_each_block([&](const char*, std::vector<double>& b) {
      const auto& o = *src[i++];
      for (std::size_t j = 0; j < b.size(); ++j) b[j] += scale * o[j];
    });
  }

  /// Pointers to the blocks in declaration order.
  std::vector<const std::vector<double>*> flat_blocks() const {
    return {&ctx_embed, &feat_proj, &blank_w, &blank_b, &label_w, &label_b};
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

class ToyModel {
 public:
  ToyModel() : ToyModel(ModelConfig{}) {}
  explicit ToyModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    params_ = ModelParams::zeros(cfg_);
  }
  ToyModel(const ModelConfig& cfg, ModelParams params) : ToyModel(cfg) {
    bool ok = true;
    auto expect = params_.flat_blocks();
    auto got = params.flat_blocks();
    for (std::size_t i = 0; i < expect.size(); ++i) ok &= expect[i]->size() == got[i]->size();
    if (!ok) throw Error(ErrorCode::DimMismatch, "parameter blocks do not match configuration");
    params_ = std::move(params);
  }

  /// Parameters drawn uniformly from [-scale, scale].
  static ToyModel random_init(const ModelConfig& cfg, std::uint64_t seed, double scale = 0.1) {
    ToyModel m(cfg);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    m.params_.for_each_block([&](const char*, std::vector<double>& b) {
      for (auto& v : b) v = dist(rng);
    });
    return m;
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  const ModelParams& params() const noexcept { return params_; }
  ModelParams& params() noexcept { return params_; }

  /// Flattened input window around frame t; frames outside [0, T) are zero.
  void window(const FeatureMatrix& x, std::size_t t, std::span<double> out) const {
    const auto d = static_cast<std::size_t>(cfg_.feature_dim);
    for (std::size_t o = 0; o < cfg_.window_frames(); ++o) {
      const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(o) - cfg_.left;
      for (std::size_t i = 0; i < d; ++i)
        out[o * d + i] = (src < 0 || src >= static_cast<std::ptrdiff_t>(x.frames))
                             ? 0.0
                             : x.data[static_cast<std::size_t>(src) * d + i];
    }
  }

  /// P^T window(x, t) for every frame: frames x hidden.
  std::vector<double> project(const FeatureMatrix& x) const {
    if (x.dim != static_cast<std::size_t>(cfg_.feature_dim))
      throw Error(ErrorCode::DimMismatch, "feature dim " + std::to_string(x.dim) +
                                              " != model dim " + std::to_string(cfg_.feature_dim));
    const auto h = static_cast<std::size_t>(cfg_.hidden);
    const auto wd = cfg_.window_dim();
    std::vector<double> out(x.frames * h, 0.0);
    std::vector<double> win(wd);
    for (std::size_t t = 0; t < x.frames; ++t) {
      window(x, t, win);
      double* o = out.data() + t * h;
      for (std::size_t i = 0; i < wd; ++i) {
        if (win[i] == 0.0) continue;
        const double* p = params_.feat_proj.data() + i * h;
        for (std::size_t j = 0; j < h; ++j) o[j] += win[i] * p[j];
      }
    }
    return out;
  }

  /// Writes [log P(eps), log P(label 0..V-1)] for one (frame projection, context).
  void log_probs(std::span<const double> proj_row, std::size_t ctx, std::span<double> out) const {
    const auto v = static_cast<std::size_t>(cfg_.vocab);
    std::vector<double> g;
    const double b = heads(proj_row, ctx, g, out.subspan(1, v));
    const double lse = log_sum_exp(out.subspan(1, v));
    const double log_continue = -softplus(b);  // log sigmoid(-b)
    out[0] = -softplus(-b);                    // log sigmoid(b)
    for (std::size_t k = 0; k < v; ++k) out[k + 1] += log_continue - lse;
  }

  /// Backpropagates output gradients `g_out` (one per output, eps first) at
  /// (frame projection, context) into `grad`, and adds the gradient with
  /// respect to the projection row into `d_proj`.
  void backward(std::span<const double> proj_row, std::size_t ctx, std::span<const double> g_out,
                ModelParams& grad, std::span<double> d_proj) const {
    const auto h = static_cast<std::size_t>(cfg_.hidden);
    const auto v = static_cast<std::size_t>(cfg_.vocab);
    std::vector<double> g, s(v);
    const double b = heads(proj_row, ctx, g, s);

    const double p_blank = 1.0 / (1.0 + std::exp(-b));
    double g_labels = 0.0;
    for (std::size_t k = 0; k < v; ++k) g_labels += g_out[k + 1];
    const double db = g_out[0] * (1.0 - p_blank) - g_labels * p_blank;

    const double lse = log_sum_exp(s);
    std::vector<double> ds(v);
    for (std::size_t k = 0; k < v; ++k) ds[k] = g_out[k + 1] - std::exp(s[k] - lse) * g_labels;

    grad.blank_b[0] += db;
    for (std::size_t k = 0; k < v; ++k) grad.label_b[k] += ds[k];
    double* de = grad.ctx_embed.data() + ctx * h;
    for (std::size_t j = 0; j < h; ++j) {
      grad.blank_w[j] += db * g[j];
      double dg = params_.blank_w[j] * db;
      const double* w = params_.label_w.data() + j * v;
      double* dw = grad.label_w.data() + j * v;
      for (std::size_t k = 0; k < v; ++k) {
        dw[k] += g[j] * ds[k];
        dg += w[k] * ds[k];
      }
      const double dpre = dg * (1.0 - g[j] * g[j]);
      de[j] += dpre;
      d_proj[j] += dpre;
    }
  }

  /// Accumulates d_proj (frames x hidden) into the feature projection gradient.
  void backward_projection(const FeatureMatrix& x, std::span<const double> d_proj,
                           ModelParams& grad) const {
    const auto h = static_cast<std::size_t>(cfg_.hidden);
    const auto wd = cfg_.window_dim();
    std::vector<double> win(wd);
    for (std::size_t t = 0; t < x.frames; ++t) {
      const double* dp = d_proj.data() + t * h;
      bool any = false;
      for (std::size_t j = 0; j < h && !any; ++j) any = dp[j] != 0.0;
      if (!any) continue;
      window(x, t, win);
      for (std::size_t i = 0; i < wd; ++i) {
        if (win[i] == 0.0) continue;
        double* g = grad.feat_proj.data() + i * h;
        for (std::size_t j = 0; j < h; ++j) g[j] += win[i] * dp[j];
      }
    }
  }

  friend bool operator==(const ToyModel& a, const ToyModel& b) {
    return a.cfg_ == b.cfg_ && a.params_ == b.params_;
  }

 private:
  static double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
  }

  static double log_sum_exp(std::span<const double> s) {
    double mx = s[0];
    for (auto x : s) mx = std::max(mx, x);
    double z = 0.0;
    for (auto x : s) z += std::exp(x - mx);
    return mx + std::log(z);
  }

  // Hidden activation into g, label logits into s; returns the blank logit.
  double heads(std::span<const double> proj_row, std::size_t ctx, std::vector<double>& g,
               std::span<double> s) const {
    const auto h = static_cast<std::size_t>(cfg_.hidden);
    const auto v = static_cast<std::size_t>(cfg_.vocab);
    g.resize(h);
    const double* e = params_.ctx_embed.data() + ctx * h;
    for (std::size_t j = 0; j < h; ++j) g[j] = std::tanh(proj_row[j] + e[j]);
    double b = params_.blank_b[0];
    for (std::size_t j = 0; j < h; ++j) b += params_.blank_w[j] * g[j];
    for (std::size_t k = 0; k < v; ++k) s[k] = params_.label_b[k];
    for (std::size_t j = 0; j < h; ++j) {
      const double* w = params_.label_w.data() + j * v;
      for (std::size_t k = 0; k < v; ++k) s[k] += g[j] * w[k];
    }
    return b;
  }

  ModelConfig cfg_;
  ModelParams params_;
};

/// Lazily evaluated model outputs for one utterance, cached per (frame, context).
class UtteranceScorer {
 public:
  UtteranceScorer(const ToyModel& model, const FeatureMatrix& x)
      : model_(&model),
        codec_(model.config()),
        frames_(x.frames),
        proj_(model.project(x)),
        slot_(x.frames * codec_.count(), -1) {}

  const ToyModel& model() const noexcept { return *model_; }
  const ContextCodec& codec() const noexcept { return codec_; }
  std::size_t num_frames() const noexcept { return frames_; }
  std::size_t num_outputs() const noexcept { return model_->config().num_outputs(); }

  std::span<const double> projection(std::size_t frame) const {
    const auto h = static_cast<std::size_t>(model_->config().hidden);
    return {proj_.data() + frame * h, h};
  }

  /// [log P(eps), log P(0), ..., log P(V-1)] at (frame, ctx).
  std::span<const double> log_probs(std::size_t frame, std::size_t ctx) {
    const auto key = frame * codec_.count() + ctx;
    const auto n = num_outputs();
    if (slot_[key] < 0) {
      slot_[key] = static_cast<std::int64_t>(cache_.size() / n);
      cache_.resize(cache_.size() + n);
      model_->log_probs(projection(frame), ctx, std::span<double>(cache_.data() + cache_.size() - n, n));
    }
    return {cache_.data() + static_cast<std::size_t>(slot_[key]) * n, n};
  }

  LogProb log_prob(std::size_t frame, std::size_t ctx, Label symbol) {
    return log_probs(frame, ctx)[static_cast<std::size_t>(symbol + 1)];
  }

 private:
  const ToyModel* model_;
  ContextCodec codec_;
  std::size_t frames_;
  std::vector<double> proj_;
  std::vector<std::int64_t> slot_;
  std::vector<double> cache_;
};

/// Arc scorer for the lattice of labels y over features x.
inline ArcScorer score_arcs(const ToyModel& model, const FeatureMatrix& x,
                            std::span<const Label> labels, LatticeKind kind) {
  for (auto l : labels)
    if (l < 0 || l >= model.config().vocab)
      throw Error(ErrorCode::InvalidArgument, "label " + std::to_string(l) + " outside vocabulary");
  auto scorer = std::make_shared<UtteranceScorer>(model, x);
  auto ctx = std::make_shared<std::vector<std::size_t>>(scorer->codec().prefixes(labels));
  const std::size_t T = x.frames;
  return [scorer, ctx, kind, T](std::size_t t, std::size_t u, Label symbol) {
    return scorer->log_prob(scoring_frame(kind, t, T), (*ctx)[u], symbol);
  };
}

}  // namespace alent
