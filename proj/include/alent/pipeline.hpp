#pragma once

// Subcommands behind the command-line tool. Every output file starts with a
// "# alent ..." line carrying the full run configuration.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "alent/checkpoint.hpp"
#include "alent/corpus.hpp"
#include "alent/decode.hpp"
#include "alent/entropy.hpp"
#include "alent/error.hpp"
#include "alent/eval.hpp"
#include "alent/model.hpp"
#include "alent/parallel.hpp"
#include "alent/train.hpp"

namespace alent {

namespace fs = std::filesystem;

struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::size_t jobs = 1;
  LatticeKind kind = LatticeKind::FrameDependent;

  // gen
  std::size_t num_utts = 200;
  std::size_t t_min = 20, t_max = 40;
  std::size_t u_min = 3, u_max = 8;
  double noise = 0.3;
  int vocab = 4;
  std::size_t feature_dim = 8;
  std::uint64_t embedding_seed = 7;
  std::string id_prefix = "utt";

  // train
  double lambda = kDefaultLambda;
  std::vector<double> lambda_sweep;
  std::size_t steps = 300;
  double step_size = 0.1;
  double init_scale = 0.1;
  int context = 2;
  int hidden = 16;
  int left = 1;
  int right = 1;

  // decode
  std::string rule = "both";
  std::size_t beam = 8;
  std::size_t max_labels = 0;  // 0: no cap

  // eval
  std::vector<double> taus = default_taus_ms();
  double frame_shift_ms = 10.0;
  std::string boundary;  // symbol that separates words; empty: one label per word

  // inputs
  std::string corpus;
  std::string model;
  std::string hyp;
  std::string ref;

  void validate() const {
    const auto bad = [](const std::string& what) { return Error(ErrorCode::InvalidArgument, what); };
    if (jobs < 1) throw bad("jobs must be at least 1");
    if (beam < 1) throw bad("beam must be at least 1");
    if (!(frame_shift_ms > 0)) throw bad("frame shift must be positive");
    if (!(step_size > 0)) throw bad("step size must be positive");
    if (lambda < 0) throw bad("lambda must be non-negative");
    for (auto l : lambda_sweep)
      if (l < 0) throw bad("lambda sweep values must be non-negative");
    for (auto t : taus)
      if (!(t >= 0)) throw bad("tau values must be non-negative");
    if (rule != "max" && rule != "sum" && rule != "both") throw bad("rule must be max, sum or both");
    if (!boundary.empty()) parse_symbol(boundary);
    const auto need = [&](const std::string& v, const char* flag) {
      if (v.empty()) throw bad(command + " needs " + flag);
    };
    if (command == "train" || command == "entropy" || command == "decode") need(corpus, "--corpus");
    if (command == "entropy" || command == "decode") need(model, "--model");
    if (command == "eval") {
      need(hyp, "--hyp");
      need(ref, "--ref");
    }
  }

  std::string header() const {
    std::ostringstream os;
    const auto list = [](const std::vector<double>& v) {
      std::string s;
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_real(v[i]);
      return s.empty() ? std::string("-") : s;
    };
    const auto str = [](const std::string& s) { return s.empty() ? std::string("-") : s; };
    os << "# alent " << command << " seed=" << seed << " out_dir=" << str(out_dir)
       << " jobs=" << jobs << " kind=" << to_string(kind) << " num_utts=" << num_utts
       << " t_range=" << t_min << ".." << t_max << " u_range=" << u_min << ".." << u_max
       << " noise=" << format_real(noise) << " vocab=" << vocab << " feature_dim=" << feature_dim
       << " embedding_seed=" << embedding_seed << " id_prefix=" << str(id_prefix)
       << " lambda=" << format_real(lambda) << " lambda_sweep=" << list(lambda_sweep)
       << " steps=" << steps << " step_size=" << format_real(step_size)
       << " init_scale=" << format_real(init_scale) << " context=" << context
       << " hidden=" << hidden << " left=" << left << " right=" << right << " rule=" << rule
       << " beam=" << beam << " max_labels=" << max_labels << " taus=" << list(taus)
       << " frame_shift_ms=" << format_real(frame_shift_ms) << " boundary=" << str(boundary)
       << " corpus=" << str(corpus) << " model=" << str(model) << " hyp=" << str(hyp)
       << " ref=" << str(ref) << '\n';
    return os.str();
  }
};

/// Writes via a temporary file and rename, so readers never see partial output.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    os << content;
    os.flush();
    if (!os) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename " + tmp.string() + ": " + ec.message());
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return is;
}

inline Corpus load_corpus(const std::string& path) {
  auto is = open_input(path);
  return read_corpus(is);
}

inline ToyModel load_model(const std::string& path) {
  auto is = open_input(path);
  return read_model(is);
}

inline void check_compatible(const ToyModel& m, const Corpus& c) {
  if (static_cast<std::size_t>(m.config().feature_dim) != c.feature_dim)
    throw Error(ErrorCode::DimMismatch, "model feature dim " + std::to_string(m.config().feature_dim) +
                                            " != corpus feature dim " + std::to_string(c.feature_dim));
  if (m.config().vocab < c.vocab)
    throw Error(ErrorCode::DimMismatch, "model vocabulary " + std::to_string(m.config().vocab) +
                                            " smaller than corpus vocabulary " +
                                            std::to_string(c.vocab));
}

inline std::string join_labels(const std::vector<Label>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? " " : "") + symbol_name(labels[i]);
  return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

inline bool skip_line(const std::string& line) {
  const auto p = line.find_first_not_of(" \t\r");
  return p == std::string::npos || line[p] == '#';
}

// --- gen ---------------------------------------------------------------

inline std::vector<fs::path> cmd_gen(const RunConfig& cfg) {
  cfg.validate();
  CorpusConfig cc;
  cc.seed = cfg.seed;
  cc.num_utts = cfg.num_utts;
  cc.t_min = cfg.t_min;
  cc.t_max = cfg.t_max;
  cc.u_min = cfg.u_min;
  cc.u_max = cfg.u_max;
  cc.noise = cfg.noise;
  cc.vocab = cfg.vocab;
  cc.feature_dim = cfg.feature_dim;
  cc.embedding_seed = cfg.embedding_seed;
  cc.id_prefix = cfg.id_prefix;
  Corpus corpus{cfg.vocab, cfg.feature_dim, generate_corpus(cc)};

  const fs::path dir(cfg.out_dir);
  std::ostringstream cs;
  cs << cfg.header();
  write_corpus(cs, corpus);

  // A line holding only an id declares an utterance without words.
  std::ostringstream rs;
  rs << cfg.header() << "utt_id\tword\tstart_ms\tend_ms\n";
  for (const auto& u : corpus.utterances) {
    if (u.words.empty()) rs << u.id << '\n';
    for (const auto& w : u.words) {
      std::string word;
      for (auto i = w.first_label; i <= w.last_label; ++i) word += symbol_name(u.labels[i]);
      rs << u.id << '\t' << word << '\t' << format_real(double(w.start_frame) * cfg.frame_shift_ms)
         << '\t' << format_real(double(w.end_frame) * cfg.frame_shift_ms) << '\n';
    }
  }
  const auto corpus_path = dir / "corpus.txt";
  const auto ref_path = dir / "reference.tsv";
  write_file_atomic(corpus_path, cs.str());
  write_file_atomic(ref_path, rs.str());
  return {corpus_path, ref_path};
}

// --- train -------------------------------------------------------------

inline std::string lambda_tag(double lambda) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", lambda);
  return buf;
}

inline std::vector<fs::path> cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const auto corpus = load_corpus(cfg.corpus);
  ModelConfig mc;
  mc.vocab = corpus.vocab;
  mc.feature_dim = static_cast<int>(corpus.feature_dim);
  mc.context = cfg.context;
  mc.hidden = cfg.hidden;
  mc.left = cfg.left;
  mc.right = cfg.right;
  mc.validate();
  const auto init = ToyModel::random_init(mc, cfg.seed, cfg.init_scale);

  const bool sweep = !cfg.lambda_sweep.empty();
  const auto lambdas = sweep ? cfg.lambda_sweep : std::vector<double>{cfg.lambda};
  const fs::path dir(cfg.out_dir);
  std::vector<fs::path> written;
  for (double lambda : lambdas) {
    TrainConfig tc{lambda, cfg.steps, cfg.step_size, cfg.kind, cfg.jobs};
    const auto result = train(init, corpus.utterances, tc);
    const auto last = loss_and_grad(result.model, corpus.utterances, lambda, cfg.kind, cfg.jobs);

    std::ostringstream ms;
    ms << cfg.header();
    write_model(ms, result.model);

    std::ostringstream cs;
    cs << cfg.header() << "lambda,step,loss,mean_nll,mean_entropy,mean_normalized_entropy\n";
    const auto row = [&](std::size_t step, double loss, double nll, double h, double nh) {
      cs << format_real(lambda) << ',' << step << ',' << format_real(loss) << ',' << format_real(nll)
         << ',' << format_real(h) << ',' << format_real(nh) << '\n';
    };
    for (const auto& p : result.curve)
      row(p.step, p.loss, p.mean_nll, p.mean_entropy, p.mean_normalized_entropy);
    row(cfg.steps, last.loss, last.mean_nll, last.mean_entropy, last.mean_normalized_entropy);

    const std::string suffix = sweep ? "_lambda" + lambda_tag(lambda) : "";
    const auto model_path = dir / ("model" + suffix + ".txt");
    const auto curve_path = dir / ("curve" + suffix + ".csv");
    write_file_atomic(model_path, ms.str());
    write_file_atomic(curve_path, cs.str());
    written.push_back(model_path);
    written.push_back(curve_path);
  }
  return written;
}

// --- entropy -----------------------------------------------------------

inline std::vector<std::size_t> by_id(const std::vector<Utterance>& utts) {
  std::vector<std::size_t> order(utts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return utts[a].id < utts[b].id; });
  return order;
}

inline std::vector<fs::path> cmd_entropy(const RunConfig& cfg) {
  cfg.validate();
  const auto corpus = load_corpus(cfg.corpus);
  const auto model = load_model(cfg.model);
  check_compatible(model, corpus);
  const auto& utts = corpus.utterances;
  std::vector<EntropyReport> reports(utts.size());
  parallel_for(utts.size(), cfg.jobs,
               [&](std::size_t i) { reports[i] = utterance_entropy(model, utts[i], cfg.kind); });

  std::ostringstream os;
  os << cfg.header() << "utt_id,T,U,entropy,max_entropy,normalized_entropy\n";
  for (auto i : by_id(utts)) {
    const auto& r = reports[i];
    os << utts[i].id << ',' << utts[i].num_frames() << ',' << utts[i].labels.size() << ','
       << format_real(r.entropy) << ',' << format_real(r.max_entropy) << ','
       << format_real(r.normalized_entropy) << '\n';
  }
  const auto path = fs::path(cfg.out_dir) / "entropy.csv";
  write_file_atomic(path, os.str());
  return {path};
}

// --- decode ------------------------------------------------------------

inline std::vector<SearchRule> rules_of(const std::string& rule) {
  if (rule == "both") return {SearchRule::Max, SearchRule::Sum};
  return {parse_search_rule(rule)};
}

inline std::vector<fs::path> cmd_decode(const RunConfig& cfg) {
  cfg.validate();
  const auto corpus = load_corpus(cfg.corpus);
  const auto model = load_model(cfg.model);
  check_compatible(model, corpus);
  const auto& utts = corpus.utterances;
  const auto rules = rules_of(cfg.rule);
  const std::size_t cap = cfg.max_labels == 0 ? kNoLabelCap : cfg.max_labels;

  std::vector<DecodeResult> results(utts.size() * rules.size());
  parallel_for(results.size(), cfg.jobs, [&](std::size_t i) {
    const auto& x = utts[i / rules.size()].features;
    results[i] = rules[i % rules.size()] == SearchRule::Max
                     ? max_search(model, x, cfg.kind, cap)
                     : sum_search(model, x, cfg.kind, cfg.beam, cap);
  });

  std::ostringstream os;
  os << cfg.header() << "utt_id\trule\tlabels\tframes\tpath_score\tscore\n";
  for (auto u : by_id(utts)) {
    for (std::size_t r = 0; r < rules.size(); ++r) {
      const auto& d = results[u * rules.size() + r];
      std::string frames;
      for (auto f : d.path.emission_frames()) frames += (frames.empty() ? "" : " ") + std::to_string(f);
      os << utts[u].id << '\t' << to_string(d.rule) << '\t' << join_labels(d.labels) << '\t'
         << frames << '\t' << format_real(d.path_score) << '\t' << format_real(d.score) << '\n';
    }
  }
  const auto path = fs::path(cfg.out_dir) / "decode.tsv";
  write_file_atomic(path, os.str());
  return {path};
}

// --- eval --------------------------------------------------------------

struct DecodeRow {
  std::vector<Label> labels;
  std::vector<std::size_t> frames;
};

/// rule -> utterance id -> decoded row.
using DecodeTable = std::map<std::string, std::map<std::string, DecodeRow>>;

inline DecodeTable read_decode_tsv(std::istream& is) {
  DecodeTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skip_line(line) || line.rfind("utt_id\t", 0) == 0) continue;
    const auto f = split(line, '\t');
    if (f.size() < 4) throw Error(ErrorCode::Parse, "decode line " + std::to_string(lineno) + " has too few fields");
    DecodeRow row;
    for (const auto& s : split_ws(f[2])) row.labels.push_back(parse_symbol(s));
    for (const auto& s : split_ws(f[3])) {
      const double v = parse_real(s);
      if (!(v >= 0) || v != static_cast<double>(static_cast<std::size_t>(v)))
        throw Error(ErrorCode::Parse, "bad frame '" + s + "' on decode line " + std::to_string(lineno));
      row.frames.push_back(static_cast<std::size_t>(v));
    }
    if (row.frames.size() != row.labels.size())
      throw Error(ErrorCode::Parse, "decode line " + std::to_string(lineno) + ": labels and frames differ in length");
    if (!t[f[1]].emplace(f[0], std::move(row)).second)
      throw Error(ErrorCode::Parse, "duplicate decode row for " + f[0] + " (" + f[1] + ")");
  }
  return t;
}

inline Timings read_reference_tsv(std::istream& is) {
  Timings t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skip_line(line) || line.rfind("utt_id\t", 0) == 0) continue;
    const auto f = split(line, '\t');
    auto& words = t[f[0]];
    if (f.size() == 1) continue;
    if (f.size() != 4) throw Error(ErrorCode::Parse, "reference line " + std::to_string(lineno) + " needs 4 fields");
    WordTiming w{f[1], parse_real(f[2]), parse_real(f[3])};
    if (w.start > w.end) throw Error(ErrorCode::Parse, "reference line " + std::to_string(lineno) + ": start after end");
    words.push_back(std::move(w));
  }
  return t;
}

inline std::vector<fs::path> cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  DecodeTable table;
  {
    auto is = open_input(cfg.hyp);
    table = read_decode_tsv(is);
  }
  Timings ref;
  {
    auto is = open_input(cfg.ref);
    ref = read_reference_tsv(is);
  }
  Tokenization tok;
  if (!cfg.boundary.empty()) tok.boundary = parse_symbol(cfg.boundary);

  std::ostringstream ws, as;
  ws << cfg.header() << "rule,wer,substitutions,insertions,deletions,ref_words\n";
  as << cfg.header() << "rule,tau_ms,acc,n_words\n";
  Transcripts<std::string> ref_words;
  for (const auto& [id, words] : ref) {
    auto& v = ref_words[id];
    for (const auto& w : words) v.push_back(w.word);
  }
  for (const auto& [rule, rows] : table) {
    Timings hyp;
    Transcripts<std::string> hyp_words;
    for (const auto& [id, row] : rows) {
      AlignmentPath p;
      for (std::size_t i = 0; i < row.labels.size(); ++i) p.steps.push_back({row.frames[i], row.labels[i]});
      auto words = word_timings_from_path(p, tok, cfg.frame_shift_ms).words;
      auto& hw = hyp_words[id];
      for (const auto& w : words) hw.push_back(w.word);
      hyp[id] = std::move(words);
    }
    const auto w = wer(hyp_words, ref_words);
    ws << rule << ',' << format_real(w.wer) << ',' << w.substitutions << ',' << w.insertions << ','
       << w.deletions << ',' << w.ref_words << '\n';
    const auto a = acc_tau(hyp, ref, cfg.taus);
    for (std::size_t k = 0; k < a.taus.size(); ++k)
      as << rule << ',' << format_real(a.taus[k]) << ',' << format_real(a.acc[k]) << ',' << a.n_words
         << '\n';
  }
  const fs::path dir(cfg.out_dir);
  const auto wer_path = dir / "wer.csv";
  const auto acc_path = dir / "acc.csv";
  write_file_atomic(wer_path, ws.str());
  write_file_atomic(acc_path, as.str());
  return {wer_path, acc_path};
}

inline std::vector<fs::path> run(const RunConfig& cfg) {
  if (cfg.command == "gen") return cmd_gen(cfg);
  if (cfg.command == "train") return cmd_train(cfg);
  if (cfg.command == "entropy") return cmd_entropy(cfg);
  if (cfg.command == "decode") return cmd_decode(cfg);
  if (cfg.command == "eval") return cmd_eval(cfg);
  throw Error(ErrorCode::InvalidArgument, "unknown command '" + cfg.command + "'");
}

}  // namespace alent
