#pragma once

// Synthetic utterances: each label owns a contiguous span of frames whose
// features are that label's embedding plus Gaussian noise; frames outside
// spans carry a silence embedding. Spans give ground-truth word timing.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "alent/error.hpp"
#include "alent/lattice.hpp"
#include "alent/model.hpp"

namespace alent {

/// Reference timing of one word: labels [first_label, last_label] occupy
/// frames [start_frame, end_frame] (0-based, inclusive).
struct WordSpan {
  std::size_t first_label = 0;
  std::size_t last_label = 0;
  std::size_t start_frame = 0;
  std::size_t end_frame = 0;
  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

struct Utterance {
  std::string id;
  FeatureMatrix features;
  std::vector<Label> labels;
  std::vector<WordSpan> words;

  std::size_t num_frames() const { return features.frames; }
  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Corpus {
  int vocab = 4;
  std::size_t feature_dim = 8;
  std::vector<Utterance> utterances;
  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct CorpusConfig {
  std::uint64_t seed = 1;
  std::size_t num_utts = 200;
  std::size_t t_min = 20;
  std::size_t t_max = 40;
  std::size_t u_min = 3;
  std::size_t u_max = 8;
  double noise = 0.3;
  int vocab = 4;
  std::size_t feature_dim = 8;
  // Embeddings are shared by every corpus generated with the same value, so
  // train and held-out sets drawn with different `seed`s are compatible.
  std::uint64_t embedding_seed = 7;
  std::string id_prefix = "utt";
};

/// Printable name of a label: 'a', 'b', ... then "L26", "L27", ...
inline std::string symbol_name(Label l) {
  if (l >= 0 && l < 26) return std::string(1, static_cast<char>('a' + l));
  return "L" + std::to_string(l);
}

inline Label parse_symbol(const std::string& s) {
  if (s.size() == 1 && s[0] >= 'a' && s[0] <= 'z') return s[0] - 'a';
  if (s.size() > 1 && s[0] == 'L') {
    try {
      return std::stoi(s.substr(1));
    } catch (const std::exception&) {
    }
  }
  throw Error(ErrorCode::Parse, "unknown symbol '" + s + "'");
}

/// Embedding rows 0..V-1 for labels, row V for silence.
inline std::vector<std::vector<double>> symbol_embeddings(int vocab, std::size_t dim,
                                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> emb(static_cast<std::size_t>(vocab) + 1,
                                       std::vector<double>(dim));
  for (auto& row : emb)
    for (auto& v : row) v = normal(rng);
  return emb;
}

inline std::vector<Utterance> generate_corpus(const CorpusConfig& cfg) {
  if (cfg.t_min > cfg.t_max || cfg.u_min > cfg.u_max)
    throw Error(ErrorCode::InvalidArgument, "empty T or U range");
  if (cfg.u_max > cfg.t_min)
    throw Error(ErrorCode::InvalidArgument, "U range maximum exceeds T range minimum");
  if (cfg.t_min == 0 || cfg.vocab < 1 || cfg.feature_dim == 0 || cfg.noise < 0)
    throw Error(ErrorCode::InvalidArgument, "invalid corpus configuration");

  const auto emb = symbol_embeddings(cfg.vocab, cfg.feature_dim, cfg.embedding_seed);
  const std::size_t silence = static_cast<std::size_t>(cfg.vocab);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto uniform = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  std::vector<Utterance> out;
  out.reserve(cfg.num_utts);
  const int width = std::max<int>(4, static_cast<int>(std::to_string(cfg.num_utts).size()));
  for (std::size_t n = 0; n < cfg.num_utts; ++n) {
    Utterance utt;
    char id[64];
    std::snprintf(id, sizeof id, "%s%0*zu", cfg.id_prefix.c_str(), width, n);
    utt.id = id;
    const std::size_t T = uniform(cfg.t_min, cfg.t_max);
    const std::size_t U = uniform(cfg.u_min, std::min(cfg.u_max, T));

    // No label repeats its predecessor, so adjacent spans stay distinguishable.
    for (std::size_t u = 0; u < U; ++u) {
      if (u == 0 || cfg.vocab == 1) {
        utt.labels.push_back(static_cast<Label>(uniform(0, std::size_t(cfg.vocab) - 1)));
      } else {
        auto l = static_cast<Label>(uniform(0, std::size_t(cfg.vocab) - 2));
        if (l >= utt.labels.back()) ++l;
        utt.labels.push_back(l);
      }
    }

    // Slot layout: gap0 span0 gap1 span1 ... span_{U-1} gap_U. Spans get one
    // frame each; inner gaps get one frame when T leaves room for it.
    const std::size_t inner_gap = (U > 0 && T >= 2 * U - 1) ? 1 : 0;
    std::vector<std::size_t> slot(2 * U + 1, 0);
    for (std::size_t u = 0; u < U; ++u) {
      slot[2 * u + 1] = 1;
      if (u > 0) slot[2 * u] = inner_gap;
    }
    std::size_t used = U + (U > 0 ? (U - 1) * inner_gap : 0);
    for (; used < T; ++used) ++slot[uniform(0, slot.size() - 1)];

    std::vector<std::size_t> owner(T, silence);
    std::size_t t = 0;
    for (std::size_t k = 0; k < slot.size(); ++k) {
      if (k % 2 == 1) {
        const std::size_t u = k / 2;
        utt.words.push_back({u, u, t, t + slot[k] - 1});
        for (std::size_t i = 0; i < slot[k]; ++i)
          owner[t + i] = static_cast<std::size_t>(utt.labels[u]);
      }
      t += slot[k];
    }

    utt.features = FeatureMatrix(T, cfg.feature_dim);
    for (std::size_t f = 0; f < T; ++f) {
      auto row = utt.features.row(f);
      for (std::size_t i = 0; i < cfg.feature_dim; ++i) row[i] = emb[owner[f]][i];
      if (cfg.noise > 0)
        for (std::size_t i = 0; i < cfg.feature_dim; ++i) row[i] += cfg.noise * normal(rng);
    }
    out.push_back(std::move(utt));
  }
  return out;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Corpus text format (lines starting with '#' are comments):
//   alent-corpus 1 <vocab> <feature_dim> <num_utts>
//   utt <id> <T> <U> <W>
//   labels <y_1> ... <y_U>
//   word <first_label> <last_label> <start_frame> <end_frame>   (W lines)
//   <d reals>                                                   (T lines)

inline void write_corpus(std::ostream& os, const Corpus& corpus) {
  os << "alent-corpus 1 " << corpus.vocab << ' ' << corpus.feature_dim << ' '
     << corpus.utterances.size() << '\n';
  for (const auto& u : corpus.utterances) {
    os << "utt " << u.id << ' ' << u.features.frames << ' ' << u.labels.size() << ' '
       << u.words.size() << '\n';
    os << "labels";
    for (auto l : u.labels) os << ' ' << l;
    os << '\n';
    for (const auto& w : u.words)
      os << "word " << w.first_label << ' ' << w.last_label << ' ' << w.start_frame << ' '
         << w.end_frame << '\n';
    for (std::size_t t = 0; t < u.features.frames; ++t) {
      const auto row = u.features.row(t);
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? " " : "") << format_real(row[i]);
      os << '\n';
    }
  }
}

inline Corpus read_corpus(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  const auto next = [&]() -> std::istringstream {
    while (std::getline(is, line)) {
      ++lineno;
      const auto p = line.find_first_not_of(" \t\r");
      if (p == std::string::npos || line[p] == '#') continue;
      return std::istringstream(line);
    }
    throw Error(ErrorCode::Parse, "unexpected end of corpus after line " + std::to_string(lineno));
  };
  const auto fail = [&](const std::string& what) {
    return Error(ErrorCode::Parse, what + " at corpus line " + std::to_string(lineno));
  };

  Corpus c;
  std::size_t n = 0;
  {
    auto ls = next();
    std::string magic;
    int version = 0;
    if (!(ls >> magic >> version >> c.vocab >> c.feature_dim >> n) || magic != "alent-corpus" ||
        version != 1)
      throw fail("bad corpus header");
  }
  for (std::size_t k = 0; k < n; ++k) {
    Utterance u;
    std::size_t T = 0, U = 0, W = 0;
    {
      auto ls = next();
      std::string tag;
      if (!(ls >> tag >> u.id >> T >> U >> W) || tag != "utt") throw fail("expected utt record");
    }
    {
      auto ls = next();
      std::string tag;
      ls >> tag;
      if (tag != "labels") throw fail("expected labels");
      u.labels.resize(U);
      for (auto& l : u.labels)
        if (!(ls >> l) || l < 0 || l >= c.vocab) throw fail("bad label");
    }
    for (std::size_t w = 0; w < W; ++w) {
      auto ls = next();
      std::string tag;
      WordSpan s;
      if (!(ls >> tag >> s.first_label >> s.last_label >> s.start_frame >> s.end_frame) ||
          tag != "word")
        throw fail("bad word record");
      if (s.first_label > s.last_label || s.last_label >= U || s.start_frame > s.end_frame ||
          s.end_frame >= T)
        throw fail("word span out of range");
      u.words.push_back(s);
    }
    u.features = FeatureMatrix(T, c.feature_dim);
    for (std::size_t t = 0; t < T; ++t) {
      auto ls = next();
      for (auto& v : u.features.row(t)) {
        std::string tok;
        if (!(ls >> tok)) throw fail("short feature row");
        v = parse_real(tok);
      }
    }
    c.utterances.push_back(std::move(u));
  }
  return c;
}

}  // namespace alent
