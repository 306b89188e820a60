#pragma once

// Word error rate and time-alignment accuracy.
//
//   ACC(tau) = sum_w 1(r_s(w) - tau <= h_s(w) && h_e(w) <= r_e(w) + tau) / N_w
//
// Hypothesis words are paired with reference words through the edit-distance
// backtrace; only correctly recognized words can score. N_w counts every
// reference word.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alent/corpus.hpp"
#include "alent/error.hpp"
#include "alent/lattice.hpp"

namespace alent {

struct WordTiming {
  std::string word;
  double start = 0.0;
  double end = 0.0;
  friend bool operator==(const WordTiming&, const WordTiming&) = default;
};

/// How labels group into words. Without a boundary symbol every label is a word.
struct Tokenization {
  std::optional<Label> boundary;
};

struct PathWords {
  std::vector<WordTiming> words;
  bool malformed = false;  // leading, trailing or doubled boundary symbols
};

/// Word start/end are the emission times of the first and last label of each
/// word, scaled by `time_per_frame`.
inline PathWords word_timings_from_path(const AlignmentPath& path, const Tokenization& tok = {},
                                        double time_per_frame = 1.0) {
  PathWords out;
  const auto labels = path.labels();
  const auto frames = path.emission_frames();
  std::string word;
  std::size_t first = 0, last = 0;
  bool open = false;
  const auto close = [&] {
    if (open) out.words.push_back({word, double(first) * time_per_frame, double(last) * time_per_frame});
    word.clear();
    open = false;
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (tok.boundary && labels[i] == *tok.boundary) {
      if (!open) out.malformed = true;
      close();
      continue;
    }
    if (!open) first = frames[i];
    open = true;
    last = frames[i];
    word += symbol_name(labels[i]);
    if (!tok.boundary) close();
  }
  if (!labels.empty() && tok.boundary && labels.back() == *tok.boundary) out.malformed = true;
  close();
  return out;
}

/// Splits labels into word strings with the same convention.
inline std::vector<std::string> label_words(std::span<const Label> labels,
                                            const Tokenization& tok = {}) {
  AlignmentPath p;
  for (auto l : labels) p.steps.push_back({0, l});
  std::vector<std::string> out;
  for (auto& w : word_timings_from_path(p, tok).words) out.push_back(std::move(w.word));
  return out;
}

enum class EditOp { Match, Substitute, Insert, Delete };

struct EditAlignment {
  std::vector<EditOp> ops;
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (ref index, hyp index)
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t distance() const { return substitutions + insertions + deletions; }
};

/// Unit-cost Levenshtein alignment. The backtrace prefers a diagonal step,
/// then a deletion, then an insertion.
template <class T>
EditAlignment align_sequences(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  const auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1), at(i - 1, j) + 1,
                           at(i, j - 1) + 1});

  EditAlignment a;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] == hyp[j - 1]) {
        a.ops.push_back(EditOp::Match);
        a.matches.emplace_back(i - 1, j - 1);
      } else {
        a.ops.push_back(EditOp::Substitute);
        ++a.substitutions;
      }
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      a.ops.push_back(EditOp::Delete);
      ++a.deletions;
      --i;
    } else {
      a.ops.push_back(EditOp::Insert);
      ++a.insertions;
      --j;
    }
  }
  std::reverse(a.ops.begin(), a.ops.end());
  std::reverse(a.matches.begin(), a.matches.end());
  return a;
}

template <class T>
EditAlignment align_sequences(const std::vector<T>& ref, const std::vector<T>& hyp) {
  return align_sequences(std::span<const T>(ref), std::span<const T>(hyp));
}

template <class Token>
using Transcripts = std::map<std::string, std::vector<Token>>;

struct WerReport {
  double wer = 0.0;
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t matches = 0;
  std::size_t ref_words = 0;
};

template <class A, class B>
void check_same_ids(const std::map<std::string, A>& hyp, const std::map<std::string, B>& ref) {
  auto h = hyp.begin();
  auto r = ref.begin();
  for (; h != hyp.end() && r != ref.end(); ++h, ++r)
    if (h->first != r->first) break;
  if (h == hyp.end() && r == ref.end()) return;
  const std::string id = h == hyp.end() ? r->first : r == ref.end() ? h->first : std::min(h->first, r->first);
  throw Error(ErrorCode::IdMismatch, "utterance '" + id + "' is not in both hypothesis and reference");
}

/// Corpus WER = (S + I + D) / N_ref. With no reference words the rate is 0
/// when the hypotheses are empty too, and infinite otherwise.
template <class Token>
WerReport wer(const Transcripts<Token>& hyp, const Transcripts<Token>& ref) {
  check_same_ids(hyp, ref);
  WerReport r;
  for (const auto& [id, words] : ref) {
    const auto a = align_sequences(words, hyp.at(id));
    r.substitutions += a.substitutions;
    r.insertions += a.insertions;
    r.deletions += a.deletions;
    r.matches += a.matches.size();
    r.ref_words += words.size();
  }
  const auto errors = r.substitutions + r.insertions + r.deletions;
  if (r.ref_words > 0)
    r.wer = double(errors) / double(r.ref_words);
  else
    r.wer = errors == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return r;
}

struct AccReport {
  std::vector<double> taus;
  std::vector<double> acc;  // one per tau
  std::size_t n_words = 0;
  std::size_t n_matched = 0;
};

using Timings = std::map<std::string, std::vector<WordTiming>>;

inline AccReport acc_tau(const Timings& hyp, const Timings& ref, std::span<const double> taus) {
  check_same_ids(hyp, ref);
  AccReport r;
  r.taus.assign(taus.begin(), taus.end());
  std::vector<std::size_t> hits(taus.size(), 0);
  for (const auto& [id, rw] : ref) {
    const auto& hw = hyp.at(id);
    std::vector<std::string> rs, hs;
    for (const auto& w : rw) rs.push_back(w.word);
    for (const auto& w : hw) hs.push_back(w.word);
    const auto a = align_sequences(rs, hs);
    r.n_words += rw.size();
    r.n_matched += a.matches.size();
    for (const auto& [i, j] : a.matches)
      for (std::size_t k = 0; k < taus.size(); ++k)
        if (rw[i].start - taus[k] <= hw[j].start && hw[j].end <= rw[i].end + taus[k]) ++hits[k];
  }
  // With no reference words every word is trivially aligned.
  for (auto h : hits) r.acc.push_back(r.n_words ? double(h) / double(r.n_words) : 1.0);
  return r;
}

inline std::vector<double> default_taus_ms() { return {0, 10, 20, 30, 40, 50}; }
inline std::vector<double> wide_taus_ms() { return {0, 100, 200, 300, 400, 500, 600}; }

}  // namespace alent
