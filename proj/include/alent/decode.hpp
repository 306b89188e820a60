#pragma once

// Decoding rules over the toy model.
//
//   max_search: exact joint argmax over (y, pi) by Viterbi on (frame, label
//               count, context).
//   sum_search: frame-synchronous beam over label prefixes; equal prefixes
//               merge, so a hypothesis score is a sum over its alignments.
//               The alignment is recovered by constrained_best_path.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "alent/error.hpp"
#include "alent/lattice.hpp"
#include "alent/model.hpp"
#include "alent/numerics.hpp"

namespace alent {

enum class SearchRule { Max, Sum };

inline std::string_view to_string(SearchRule r) { return r == SearchRule::Max ? "max" : "sum"; }

inline SearchRule parse_search_rule(std::string_view s) {
  if (s == "max") return SearchRule::Max;
  if (s == "sum") return SearchRule::Sum;
  throw Error(ErrorCode::InvalidArgument, "unknown search rule '" + std::string(s) + "'");
}

inline constexpr std::size_t kNoLabelCap = std::numeric_limits<std::size_t>::max();
inline constexpr std::size_t kUnboundedBeam = std::numeric_limits<std::size_t>::max();
inline constexpr double kTieTol = 1e-12;

struct DecodeResult {
  std::vector<Label> labels;
  AlignmentPath path;
  LogProb score = 0.0;       // joint score (max) or merged hypothesis score (sum)
  LogProb path_score = 0.0;  // joint score of `path`
  SearchRule rule = SearchRule::Max;
  std::size_t beam = 0;      // 0 for max_search
};

namespace detail {

inline bool near_best(double cand, double best) {
  return cand >= best - kTieTol * std::max(1.0, std::fabs(best));
}

// Transducer lattices allow any number of labels per frame; an uncapped
// search stops at T labels.
inline std::size_t label_cap(LatticeKind kind, std::size_t T, std::size_t max_labels) {
  if (kind == LatticeKind::FrameDependent) return std::min(max_labels, T);
  return max_labels == kNoLabelCap ? T : max_labels;
}

inline void check_searchable(LatticeKind kind) {
  if (kind == LatticeKind::LabelDependent)
    throw Error(ErrorCode::InvalidArgument, "search over label-dependent lattices is not supported");
}

}  // namespace detail

/// Joint log-probability of `path` under the model, through score_arcs.
inline LogProb score_path(const ToyModel& model, const FeatureMatrix& x, const AlignmentPath& path,
                          LatticeKind kind) {
  const auto labels = path.labels();
  const auto scorer = score_arcs(model, x, labels, kind);
  LogProb total = 0.0;
  std::size_t u = 0;
  for (const auto& s : path.steps) {
    total += scorer(s.frame, u, s.symbol);
    if (s.symbol != kEpsilon) ++u;
  }
  return total;
}

/// Best alignment of fixed labels y. Ties go to the earlier label emission.
inline AlignmentPath constrained_best_path(const ToyModel& model, const FeatureMatrix& x,
                                           std::span<const Label> y, LatticeKind kind) {
  const std::size_t T = x.frames;
  if (T == 0 && y.empty()) return {};
  const auto lat = build_lattice(kind, T, y, score_arcs(model, x, y, kind));

  std::vector<LogProb> best(lat.num_states(), kNegInf);
  best[lat.final_state()] = 0.0;
  for (std::size_t s = lat.num_states(); s-- > 0;) {
    const auto [b, e] = lat.arc_range(s);
    for (std::size_t i = b; i < e; ++i)
      best[s] = std::max(best[s], lat.arcs()[i].weight + best[lat.dst_index(i)]);
  }

  AlignmentPath path;
  std::size_t s = lat.initial();
  while (s != lat.final_state()) {
    const auto [b, e] = lat.arc_range(s);
    std::size_t pick = e;
    for (std::size_t i = b; i < e; ++i) {
      const auto& a = lat.arcs()[i];
      if (!detail::near_best(a.weight + best[lat.dst_index(i)], best[s])) continue;
      if (pick == e || (!a.is_epsilon() && lat.arcs()[pick].is_epsilon())) pick = i;
    }
    const auto& a = lat.arcs()[pick];
    path.steps.push_back({scoring_frame(kind, a.src.t, T), a.symbol});
    s = lat.dst_index(pick);
  }
  return path;
}

/// Exact argmax over (y, pi) with at most max_labels labels. Ties prefer
/// epsilon, then the lowest label, at the earliest differing step.
inline DecodeResult max_search(const ToyModel& model, const FeatureMatrix& x, LatticeKind kind,
                               std::size_t max_labels = kNoLabelCap) {
  detail::check_searchable(kind);
  DecodeResult out;
  out.rule = SearchRule::Max;
  const std::size_t T = x.frames;
  if (T == 0) return out;

  UtteranceScorer scorer(model, x);
  const auto& codec = scorer.codec();
  const std::size_t n_ctx = codec.count();
  const auto V = static_cast<std::size_t>(model.config().vocab);
  const std::size_t cap = detail::label_cap(kind, T, max_labels);
  const bool frame_dep = kind == LatticeKind::FrameDependent;
  // A frame-dependent search that can emit on every frame needs no label count.
  const bool track_u = !(frame_dep && cap >= T);
  const std::size_t n_u = track_u ? cap + 1 : 1;

  // best[t][u][ctx]: best log-probability of finishing from that state.
  std::vector<LogProb> best((T + 1) * n_u * n_ctx, 0.0);
  const auto at = [&](std::size_t t, std::size_t u, std::size_t k) -> LogProb& {
    return best[(t * n_u + u) * n_ctx + k];
  };
  const auto can_emit = [&](std::size_t u) { return !track_u || u < cap; };
  const auto next_u = [&](std::size_t u) { return track_u ? u + 1 : u; };

  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t u = n_u; u-- > 0;) {
      for (std::size_t k = 0; k < n_ctx; ++k) {
        const auto lp = scorer.log_probs(t, k);
        LogProb b = lp[0] + at(t + 1, u, k);
        if (can_emit(u)) {
          for (std::size_t l = 0; l < V; ++l) {
            const auto k2 = codec.extend(k, static_cast<Label>(l));
            const LogProb rest = frame_dep ? at(t + 1, next_u(u), k2) : at(t, u + 1, k2);
            b = std::max(b, lp[l + 1] + rest);
          }
        }
        at(t, u, k) = b;
      }
    }
  }

  std::size_t t = 0, u = 0, k = codec.initial();
  while (t < T) {
    const auto lp = scorer.log_probs(t, k);
    const LogProb target = at(t, u, k);
    Label pick = kEpsilon;
    if (!detail::near_best(lp[0] + at(t + 1, u, k), target)) {
      for (std::size_t l = 0; l < V; ++l) {
        const auto k2 = codec.extend(k, static_cast<Label>(l));
        const LogProb rest = frame_dep ? at(t + 1, next_u(u), k2) : at(t, u + 1, k2);
        if (detail::near_best(lp[l + 1] + rest, target)) {
          pick = static_cast<Label>(l);
          break;
        }
      }
    }
    out.path.steps.push_back({t, pick});
    out.path_score += lp[static_cast<std::size_t>(pick + 1)];
    if (pick == kEpsilon) {
      ++t;
    } else {
      out.labels.push_back(pick);
      k = codec.extend(k, pick);
      if (frame_dep) {
        ++t;
        u = next_u(u);
      } else {
        ++u;
      }
    }
  }
  out.score = out.path_score;
  return out;
}

/// Beam search over label prefixes with exact merging of equal prefixes.
/// Ties between hypotheses go to the lexicographically smaller prefix.
inline DecodeResult sum_search(const ToyModel& model, const FeatureMatrix& x, LatticeKind kind,
                               std::size_t beam, std::size_t max_labels = kNoLabelCap) {
  detail::check_searchable(kind);
  if (beam < 1) throw Error(ErrorCode::InvalidArgument, "beam must be at least 1");
  DecodeResult out;
  out.rule = SearchRule::Sum;
  out.beam = beam;
  const std::size_t T = x.frames;
  if (T == 0) return out;

  UtteranceScorer scorer(model, x);
  const auto& codec = scorer.codec();
  const auto V = static_cast<std::size_t>(model.config().vocab);
  const std::size_t cap = detail::label_cap(kind, T, max_labels);

  struct Hyp {
    std::size_t ctx = 0;
    LogProb score = kNegInf;
  };
  using Pool = std::map<std::vector<Label>, Hyp>;
  const auto add = [](Pool& pool, std::vector<Label> prefix, std::size_t ctx, LogProb s) {
    auto [it, inserted] = pool.try_emplace(std::move(prefix), Hyp{ctx, s});
    if (!inserted) it->second.score = logprob_add(it->second.score, s);
  };
  // Ranked by score, then prefix; std::map order makes the sort stable in prefix.
  const auto ranked = [](const Pool& pool) {
    std::vector<Pool::const_iterator> r;
    r.reserve(pool.size());
    for (auto it = pool.begin(); it != pool.end(); ++it) r.push_back(it);
    std::stable_sort(r.begin(), r.end(),
                     [](auto a, auto b) { return a->second.score > b->second.score; });
    return r;
  };
  const auto prune = [&](Pool& pool) {
    if (pool.size() <= beam) return;
    Pool kept;
    auto r = ranked(pool);
    for (std::size_t i = 0; i < beam; ++i) kept.insert(*r[i]);
    pool = std::move(kept);
  };
  const auto extend = [&](const std::vector<Label>& p, Label l) {
    auto q = p;
    q.push_back(l);
    return q;
  };

  Pool pool;
  add(pool, {}, codec.initial(), 0.0);
  if (kind == LatticeKind::FrameDependent) {
    for (std::size_t t = 0; t < T; ++t) {
      Pool next;
      for (const auto& [p, h] : pool) {
        const auto lp = scorer.log_probs(t, h.ctx);
        add(next, p, h.ctx, h.score + lp[0]);
        if (p.size() < cap)
          for (std::size_t l = 0; l < V; ++l)
            add(next, extend(p, static_cast<Label>(l)), codec.extend(h.ctx, static_cast<Label>(l)),
                h.score + lp[l + 1]);
      }
      prune(next);
      pool = std::move(next);
    }
  } else {
    for (std::size_t t = 0; t <= T; ++t) {
      const std::size_t frame = scoring_frame(kind, t, T);
      // Expand labels within the row one length level at a time, so each
      // level is complete (merged) before it is pruned and extended.
      std::size_t len = pool.begin()->first.size();
      for (const auto& [p, h] : pool) len = std::min(len, p.size());
      for (;; ++len) {
        Pool level;
        bool longer = false;
        for (auto it = pool.begin(); it != pool.end();) {
          if (it->first.size() == len) {
            level.insert(pool.extract(it++));
          } else {
            longer |= it->first.size() > len;
            ++it;
          }
        }
        if (level.empty() && !longer) break;
        prune(level);
        for (const auto& [p, h] : level) {
          if (p.size() >= cap) continue;
          const auto lp = scorer.log_probs(frame, h.ctx);
          for (std::size_t l = 0; l < V; ++l)
            add(pool, extend(p, static_cast<Label>(l)), codec.extend(h.ctx, static_cast<Label>(l)),
                h.score + lp[l + 1]);
        }
        pool.merge(level);
      }
      prune(pool);
      if (t == T) break;
      for (auto& [p, h] : pool) h.score += scorer.log_probs(frame, h.ctx)[0];
    }
  }

  const auto best = ranked(pool).front();
  out.labels = best->first;
  out.score = best->second.score;
  out.path = constrained_best_path(model, x, out.labels, kind);
  out.path_score = score_path(model, x, out.path, kind);
  return out;
}

}  // namespace alent
