#pragma once

// Alignment lattices over a (T+1) x (U+1) grid of states (t, u): t frames
// consumed, u labels emitted. Every initial-to-final path is one alignment of
// the label sequence to the frames.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "alent/error.hpp"
#include "alent/numerics.hpp"

namespace alent {

/// Output symbol id in [0, V). Blank / epsilon is kEpsilon.
using Label = int;
inline constexpr Label kEpsilon = -1;

using BigCount = boost::multiprecision::cpp_int;

enum class LatticeKind {
  FrameDependent,  // each frame emits at most one symbol (C(T,U) paths)
  LabelAndFrame,   // transducer style: labels and frame advances interleave (C(T+U,U))
  LabelDependent,  // one label-synchronous path
};

inline std::string_view to_string(LatticeKind kind) {
  switch (kind) {
    case LatticeKind::FrameDependent: return "FrameDependent";
    case LatticeKind::LabelAndFrame: return "LabelAndFrame";
    case LatticeKind::LabelDependent: return "LabelDependent";
  }
  return "Unknown";
}

inline LatticeKind parse_lattice_kind(std::string_view s) {
  if (s == "FrameDependent" || s == "frame" || s == "ctc") return LatticeKind::FrameDependent;
  if (s == "LabelAndFrame" || s == "label-frame" || s == "rnnt" || s == "hat")
    return LatticeKind::LabelAndFrame;
  if (s == "LabelDependent" || s == "label" || s == "las") return LatticeKind::LabelDependent;
  throw Error(ErrorCode::Parse, "unknown lattice kind '" + std::string(s) + "'");
}

struct LatticeState {
  std::size_t t = 0;
  std::size_t u = 0;

  friend bool operator==(const LatticeState&, const LatticeState&) = default;
  friend auto operator<=>(const LatticeState&, const LatticeState&) = default;
};

struct Arc {
  LatticeState src;
  LatticeState dst;
  Label symbol = kEpsilon;
  LogProb weight = 0.0;

  bool is_epsilon() const noexcept { return symbol == kEpsilon; }
  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Log-weight of the arc leaving state (t, u) with `symbol`. For label arcs
/// the symbol is y_{u+1}.
using ArcScorer = std::function<LogProb(std::size_t t, std::size_t u, Label symbol)>;

/// Frame whose features drive arcs leaving lattice row t. Transducer lattices
/// have a row t = T for trailing labels; it reuses the last frame.
inline std::size_t scoring_frame(LatticeKind kind, std::size_t t, std::size_t T) {
  if (kind == LatticeKind::LabelAndFrame || kind == LatticeKind::LabelDependent)
    return T == 0 ? 0 : std::min(t, T - 1);
  return t;
}

struct PathStep {
  std::size_t frame = 0;
  Label symbol = kEpsilon;
  friend bool operator==(const PathStep&, const PathStep&) = default;
};

/// One alignment: the symbol taken at each step with the frame it is tied to.
struct AlignmentPath {
  std::vector<PathStep> steps;

  std::vector<Label> labels() const {
    std::vector<Label> out;
    for (const auto& s : steps)
      if (s.symbol != kEpsilon) out.push_back(s.symbol);
    return out;
  }

  /// Frame at which each non-epsilon symbol was emitted.
  std::vector<std::size_t> emission_frames() const {
    std::vector<std::size_t> out;
    for (const auto& s : steps)
      if (s.symbol != kEpsilon) out.push_back(s.frame);
    return out;
  }

  friend bool operator==(const AlignmentPath&, const AlignmentPath&) = default;
};

class Lattice {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  /// Validates the arcs against the kind's topology, then keeps only states on
  /// some initial -> final path.
  static Lattice from_arcs(LatticeKind kind, std::size_t T, std::size_t U,
                           std::vector<Arc> arcs) {
    const auto in_grid = [&](const LatticeState& s) { return s.t <= T && s.u <= U; };
    for (const auto& a : arcs) {
      if (!in_grid(a.src) || !in_grid(a.dst))
        throw Error(ErrorCode::InvalidArgument, "arc outside the state grid");
      if (!(a.src < a.dst)) throw Error(ErrorCode::InvalidArgument, "arc does not advance");
      if (std::isnan(a.weight)) throw Error(ErrorCode::InvalidArgument, "NaN arc weight");
      check_topology(kind, a);
    }
    return build_trimmed(kind, T, U, std::move(arcs));
  }

  LatticeKind kind() const noexcept { return kind_; }
  std::size_t num_frames() const noexcept { return T_; }
  std::size_t num_labels() const noexcept { return U_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }

  /// States in topological (lexicographic (t, u)) order.
  const std::vector<LatticeState>& states() const noexcept { return states_; }
  /// Arcs grouped by source state, in source topological order.
  const std::vector<Arc>& arcs() const noexcept { return arcs_; }

  std::size_t num_states() const noexcept { return states_.size(); }
  std::size_t initial() const noexcept { return 0; }
  std::size_t final_state() const noexcept { return states_.size() - 1; }

  /// Index range [first, last) into arcs() of arcs leaving state `s`.
  std::pair<std::size_t, std::size_t> arc_range(std::size_t s) const noexcept {
    return {arc_begin_[s], arc_begin_[s + 1]};
  }

  std::size_t state_index(LatticeState s) const noexcept {
    if (s.t > T_ || s.u > U_) return npos;
    const auto idx = grid_[s.t * (U_ + 1) + s.u];
    return idx < 0 ? npos : static_cast<std::size_t>(idx);
  }

  std::size_t src_index(std::size_t arc) const noexcept { return arc_src_[arc]; }
  std::size_t dst_index(std::size_t arc) const noexcept { return arc_dst_[arc]; }

  /// Same topology, new per-arc weights (indexed like arcs()).
  Lattice with_weights(std::span<const LogProb> weights) const {
    if (weights.size() != arcs_.size())
      throw Error(ErrorCode::DimMismatch, "weight count differs from arc count");
    Lattice out = *this;
    for (std::size_t i = 0; i < arcs_.size(); ++i) out.arcs_[i].weight = weights[i];
    return out;
  }

  friend bool operator==(const Lattice& x, const Lattice& y) {
    return x.kind_ == y.kind_ && x.T_ == y.T_ && x.U_ == y.U_ && x.states_ == y.states_ &&
           x.arcs_ == y.arcs_;
  }

 private:
  static void check_topology(LatticeKind kind, const Arc& a) {
    const bool ok = [&] {
      switch (kind) {
        case LatticeKind::FrameDependent:
          return a.dst.t == a.src.t + 1 && a.dst.u == a.src.u + (a.is_epsilon() ? 0 : 1);
        case LatticeKind::LabelAndFrame:
          return a.is_epsilon() ? (a.dst.t == a.src.t + 1 && a.dst.u == a.src.u)
                                : (a.dst.t == a.src.t && a.dst.u == a.src.u + 1);
        case LatticeKind::LabelDependent:
          return a.is_epsilon() ? a.dst.u == a.src.u : a.dst.u == a.src.u + 1;
      }
      return false;
    }();
    if (!ok)
      throw Error(ErrorCode::InvalidArgument,
                  "arc violates " + std::string(to_string(kind)) + " topology");
  }

  static Lattice build_trimmed(LatticeKind kind, std::size_t T, std::size_t U,
                               std::vector<Arc> arcs) {
    const std::size_t width = U + 1;
    const std::size_t cells = (T + 1) * width;
    const auto cell = [width](const LatticeState& s) { return s.t * width + s.u; };

    // Lexicographic cell order is topological for every supported kind.
    std::vector<std::vector<std::size_t>> out_arcs(cells), in_arcs(cells);
    for (std::size_t i = 0; i < arcs.size(); ++i) {
      out_arcs[cell(arcs[i].src)].push_back(i);
      in_arcs[cell(arcs[i].dst)].push_back(i);
    }
    std::vector<char> fwd(cells, 0), bwd(cells, 0);
    fwd[0] = 1;
    for (std::size_t c = 0; c < cells; ++c)
      if (fwd[c])
        for (auto i : out_arcs[c]) fwd[cell(arcs[i].dst)] = 1;
    bwd[cells - 1] = 1;
    for (std::size_t c = cells; c-- > 0;)
      if (bwd[c])
        for (auto i : in_arcs[c]) bwd[cell(arcs[i].src)] = 1;
    if (!fwd[cells - 1])
      throw Error(ErrorCode::EmptyLattice, "final state unreachable from initial state");

    Lattice lat;
    lat.kind_ = kind;
    lat.T_ = T;
    lat.U_ = U;
    lat.grid_.assign(cells, -1);
    for (std::size_t c = 0; c < cells; ++c) {
      if (fwd[c] && bwd[c]) {
        lat.grid_[c] = static_cast<std::int32_t>(lat.states_.size());
        lat.states_.push_back({c / width, c % width});
      }
    }
    lat.arc_begin_.push_back(0);
    for (const auto& s : lat.states_) {
      auto& ids = out_arcs[cell(s)];
      // Epsilon first, then labels; ties by destination.
      std::stable_sort(ids.begin(), ids.end(), [&](std::size_t a, std::size_t b) {
        return std::pair(arcs[a].symbol, arcs[a].dst) < std::pair(arcs[b].symbol, arcs[b].dst);
      });
      for (auto i : ids) {
        const auto d = lat.grid_[cell(arcs[i].dst)];
        if (d < 0) continue;
        lat.arcs_.push_back(arcs[i]);
        lat.arc_src_.push_back(static_cast<std::size_t>(lat.grid_[cell(s)]));
        lat.arc_dst_.push_back(static_cast<std::size_t>(d));
      }
      lat.arc_begin_.push_back(lat.arcs_.size());
    }

    lat.labels_.assign(U, kEpsilon);
    for (const auto& a : lat.arcs_) {
      if (a.is_epsilon()) continue;
      auto& slot = lat.labels_[a.src.u];
      if (slot != kEpsilon && slot != a.symbol)
        throw Error(ErrorCode::InvalidArgument, "inconsistent label at position " +
                                                    std::to_string(a.src.u));
      slot = a.symbol;
    }
    return lat;
  }

  LatticeKind kind_ = LatticeKind::FrameDependent;
  std::size_t T_ = 0;
  std::size_t U_ = 0;
  std::vector<Label> labels_;
  std::vector<LatticeState> states_;
  std::vector<Arc> arcs_;
  std::vector<std::size_t> arc_begin_;
  std::vector<std::size_t> arc_src_;
  std::vector<std::size_t> arc_dst_;
  std::vector<std::int32_t> grid_;
};

/// Builds the trimmed lattice of all alignments of `labels` to T frames.
inline Lattice build_lattice(LatticeKind kind, std::size_t T, std::span<const Label> labels,
                             const ArcScorer& scorer) {
  const std::size_t U = labels.size();
  if (T == 0 && U > 0)
    throw Error(ErrorCode::EmptyLattice, "no frames for a non-empty label sequence");
  if (kind == LatticeKind::FrameDependent && U > T)
    throw Error(ErrorCode::InfeasiblePair,
                "U=" + std::to_string(U) + " exceeds T=" + std::to_string(T));

  std::vector<Arc> arcs;
  const auto eps = [&](LatticeState s, LatticeState d) {
    arcs.push_back({s, d, kEpsilon, scorer(s.t, s.u, kEpsilon)});
  };
  const auto lab = [&](LatticeState s, LatticeState d) {
    arcs.push_back({s, d, labels[s.u], scorer(s.t, s.u, labels[s.u])});
  };

  switch (kind) {
    case LatticeKind::FrameDependent:
      arcs.reserve(2 * (T + 1) * (U + 1));
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t u = 0; u <= std::min(t, U); ++u) {
          if (U - u > T - t) continue;
          if (U - u <= T - t - 1) eps({t, u}, {t + 1, u});
          if (u < U) lab({t, u}, {t + 1, u + 1});
        }
      }
      break;
    case LatticeKind::LabelAndFrame:
      arcs.reserve(2 * (T + 1) * (U + 1));
      for (std::size_t t = 0; t <= T; ++t) {
        for (std::size_t u = 0; u <= U; ++u) {
          if (t < T) eps({t, u}, {t + 1, u});
          if (u < U) lab({t, u}, {t, u + 1});
        }
      }
      break;
    case LatticeKind::LabelDependent:
      // Consume every frame in one step, then emit the labels in order.
      if (T > 0) eps({0, 0}, {T, 0});
      for (std::size_t u = 0; u < U; ++u) lab({T, u}, {T, u + 1});
      break;
  }
  return Lattice::from_arcs(kind, T, U, std::move(arcs));
}

/// Positional labels 0..U-1; for tests and fixtures that only care about shape.
inline Lattice build_lattice(LatticeKind kind, std::size_t T, std::size_t U,
                             const ArcScorer& scorer) {
  std::vector<Label> labels(U);
  std::iota(labels.begin(), labels.end(), 0);
  return build_lattice(kind, T, labels, scorer);
}

inline ArcScorer uniform_scorer(LogProb w = 0.0) {
  return [w](std::size_t, std::size_t, Label) { return w; };
}

inline Lattice trim(const Lattice& lat) {
  return Lattice::from_arcs(lat.kind(), lat.num_frames(), lat.num_labels(), lat.arcs());
}

/// Exact path count by DP over the topological order.
inline BigCount num_paths(const Lattice& lat) {
  std::vector<BigCount> count(lat.num_states(), 0);
  count[lat.initial()] = 1;
  for (std::size_t i = 0; i < lat.arcs().size(); ++i)
    count[lat.dst_index(i)] += count[lat.src_index(i)];
  return count[lat.final_state()];
}

/// log(num_paths) computed in the log domain; safe for very large lattices.
inline double log_num_paths(const Lattice& lat) {
  std::vector<double> lc(lat.num_states(), kNegInf);
  lc[lat.initial()] = 0.0;
  for (std::size_t i = 0; i < lat.arcs().size(); ++i)
    lc[lat.dst_index(i)] = logprob_add(lc[lat.dst_index(i)], lc[lat.src_index(i)]);
  return lc[lat.final_state()];
}

/// Closed-form path count for a kind, as log.
inline double log_closed_form_paths(LatticeKind kind, std::size_t T, std::size_t U) {
  switch (kind) {
    case LatticeKind::FrameDependent: return log_binomial(double(T), double(U));
    case LatticeKind::LabelAndFrame: return log_binomial(double(T + U), double(U));
    case LatticeKind::LabelDependent: return 0.0;
  }
  return kNegInf;
}

struct WeightedPath {
  AlignmentPath path;
  LogProb weight = 0.0;
};

inline constexpr std::size_t kDefaultEnumerationCap = 1'000'000;

/// Every initial -> final path with its total log-weight, in DFS order
/// (epsilon before label at each branch).
inline std::vector<WeightedPath> enumerate_paths(const Lattice& lat,
                                                 std::size_t cap = kDefaultEnumerationCap) {
  if (num_paths(lat) > cap)
    throw Error(ErrorCode::TooManyPaths, "lattice has more than " + std::to_string(cap) + " paths");
  std::vector<WeightedPath> out;
  std::vector<PathStep> stack;
  const auto dfs = [&](auto&& self, std::size_t s, LogProb w) -> void {
    if (s == lat.final_state()) {
      out.push_back({AlignmentPath{stack}, w});
      return;
    }
    const auto [b, e] = lat.arc_range(s);
    for (std::size_t i = b; i < e; ++i) {
      const auto& a = lat.arcs()[i];
      stack.push_back({scoring_frame(lat.kind(), a.src.t, lat.num_frames()), a.symbol});
      self(self, lat.dst_index(i), w + a.weight);
      stack.pop_back();
    }
  };
  dfs(dfs, lat.initial(), 0.0);
  return out;
}

// Text format: header "kind T U", then one arc per line
// "src_t src_u dst_t dst_u symbol log_weight" with "~" for epsilon.

inline void write_lattice(std::ostream& os, const Lattice& lat) {
  os << to_string(lat.kind()) << ' ' << lat.num_frames() << ' ' << lat.num_labels() << '\n';
  os << std::setprecision(17);
  for (const auto& a : lat.arcs()) {
    os << a.src.t << ' ' << a.src.u << ' ' << a.dst.t << ' ' << a.dst.u << ' ';
    if (a.is_epsilon())
      os << '~';
    else
      os << a.symbol;
    os << ' ';
    if (a.weight == kNegInf)
      os << "-inf";
    else
      os << a.weight;
    os << '\n';
  }
}

/// Parses a real written by the text formats; accepts "-inf".
inline double parse_real(const std::string& tok) {
  if (tok == "-inf") return kNegInf;
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size()) throw Error(ErrorCode::Parse, "bad number '" + tok + "'");
  return v;
}

inline Lattice read_lattice(std::istream& is) {
  std::string line;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      const auto p = line.find_first_not_of(" \t\r");
      if (p == std::string::npos || line[p] == '#') continue;
      return true;
    }
    return false;
  };
  if (!next_line()) throw Error(ErrorCode::Parse, "missing lattice header");
  std::istringstream hs(line);
  std::string kind_tok;
  std::size_t T = 0, U = 0;
  if (!(hs >> kind_tok >> T >> U)) throw Error(ErrorCode::Parse, "bad header: " + line);
  const auto kind = parse_lattice_kind(kind_tok);

  std::vector<Arc> arcs;
  while (next_line()) {
    std::istringstream ls(line);
    Arc a;
    std::string sym, w;
    if (!(ls >> a.src.t >> a.src.u >> a.dst.t >> a.dst.u >> sym >> w))
      throw Error(ErrorCode::Parse, "bad arc line: " + line);
    if (sym == "~") {
      a.symbol = kEpsilon;
    } else {
      try {
        a.symbol = std::stoi(sym);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Parse, "bad symbol '" + sym + "'");
      }
      if (a.symbol < 0) throw Error(ErrorCode::Parse, "negative symbol '" + sym + "'");
    }
    a.weight = parse_real(w);
    arcs.push_back(a);
  }
  return Lattice::from_arcs(kind, T, U, std::move(arcs));
}

}  // namespace alent
