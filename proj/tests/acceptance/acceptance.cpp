// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "../support.hpp"
#include "alent/decode.hpp"
#include "alent/entropy.hpp"
#include "alent/eval.hpp"
#include "alent/pipeline.hpp"
#include "alent/train.hpp"

using namespace alent;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> weights_of(const Lattice& lat) {
  std::vector<double> w;
  for (const auto& a : lat.arcs()) w.push_back(a.weight);
  return w;
}

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double worst = 0;
  int n = 0;
  for (; n < 1200; ++n) {
    const auto kind = n % 2 ? LatticeKind::FrameDependent : LatticeKind::LabelAndFrame;
    const std::size_t T = 1 + rng() % 10;
    const std::size_t U = rng() % (std::min<std::size_t>(T, 5) + 1);
    const auto lat = test::random_lattice(rng, kind, T, U, -5.0, 1.0);
    worst = std::max(worst, std::fabs(alignment_entropy(lat).entropy - test::brute_entropy(enumerate_paths(lat))));
  }
  const double s = seconds_since(t0);
  report(1, worst <= 1e-8 && s < 30, fmt("%d lattices, max |H - brute| = %.3g, %.1f s", n, worst, s));
}

void criterion2() {
  double worst = 0;
  for (std::size_t T = 0; T <= 12; ++T) {
    for (std::size_t U = 0; U <= T; ++U) {
      double c = 1;
      for (std::size_t i = 1; i <= U; ++i) c = c * double(T - U + i) / double(i);
      const auto lat = build_lattice(LatticeKind::FrameDependent, T, U, uniform_scorer(std::log(0.25)));
      worst = std::max(worst, std::fabs(alignment_entropy(lat).entropy - std::log(c)));
    }
  }
  report(2, worst <= 1e-9, fmt("T <= 12, U <= T, max |H - log C(T,U)| = %.3g", worst));
}

void criterion3() {
  std::ifstream is(std::string(ALENT_FIXTURE_DIR) + "/two_path.lat");
  const auto lat = read_lattice(is);
  const double truth = test::brute_entropy(enumerate_paths(lat));
  const double fixed = std::fabs(alignment_entropy(lat).entropy - truth);
  const double dropped = std::fabs(test::dropped_alpha_entropy(lat) - truth);
  report(3, fixed <= 1e-8 && dropped > 1e-8,
         fmt("two-path fixture: corrected error %.3g, dropped-alpha error %.3g", fixed, dropped));
}

void criterion4() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(404);
  double worst_h = 0, worst_l = 0;
  for (int n = 0; n < 20; ++n) {
    const auto kind = n % 2 ? LatticeKind::FrameDependent : LatticeKind::LabelAndFrame;
    const std::size_t T = 2 + rng() % 6;
    const std::size_t U = 1 + rng() % std::min<std::size_t>(T, 3);
    const auto lat = test::random_lattice(rng, kind, T, U);
    const auto g = entropy_grad(lat);
    const auto fd = test::finite_diff(
        [&](const std::vector<double>& w) { return alignment_entropy(lat.with_weights(w)).entropy; },
        weights_of(lat), 1e-5);
    for (std::size_t i = 0; i < g.size(); ++i) worst_h = std::max(worst_h, std::fabs(g[i] - fd[i]));

    CorpusConfig cc;
    cc.seed = rng();
    cc.num_utts = 2;
    cc.t_min = 3;
    cc.t_max = 6;
    cc.u_min = 1;
    cc.u_max = 3;
    cc.vocab = 3;
    cc.feature_dim = 3;
    const auto utts = generate_corpus(cc);
    ModelConfig mc;
    mc.vocab = 3;
    mc.context = 1;
    mc.feature_dim = 3;
    mc.hidden = 3;
    auto m = ToyModel::random_init(mc, rng(), 0.8);
    const double lambda = 0.01 * double(1 + rng() % 50);
    const auto r = loss_and_grad(m, utts, lambda, kind);
    const auto blocks = r.grad.flat_blocks();
    std::size_t b = 0;
    m.params().for_each_block([&](const char*, std::vector<double>& p) {
      const auto& gb = *blocks[b++];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double p0 = p[i];
        p[i] = p0 + 1e-5;
        const double fp = loss_and_grad(m, utts, lambda, kind).loss;
        p[i] = p0 - 1e-5;
        const double fm = loss_and_grad(m, utts, lambda, kind).loss;
        p[i] = p0;
        worst_l = std::max(worst_l, std::fabs(gb[i] - (fp - fm) / 2e-5));
      }
    });
  }
  const double s = seconds_since(t0);
  report(4, worst_h <= 1e-4 && worst_l <= 1e-4 && s < 60,
         fmt("20 instances, max error entropy_grad %.3g, loss_and_grad %.3g, %.1f s", worst_h, worst_l, s));
}

struct Trained {
  ToyModel model;
  double start_nh = 0, final_nh = 0;
};

Trained train_run(const std::vector<Utterance>& utts, double lambda) {
  TrainConfig tc;
  tc.lambda = lambda;
  tc.steps = 300;
  tc.step_size = 0.1;
  tc.jobs = 1;
  auto r = train(ToyModel::random_init(ModelConfig{}, 1, 0.1), utts, tc);
  const double final_nh = loss_and_grad(r.model, utts, lambda).mean_normalized_entropy;
  return {std::move(r.model), r.curve.front().mean_normalized_entropy, final_nh};
}

CorpusConfig corpus_config(std::uint64_t seed) {
  CorpusConfig cc;
  cc.seed = seed;
  cc.num_utts = 200;
  cc.t_min = 20;
  cc.t_max = 40;
  cc.u_min = 3;
  cc.u_max = 8;
  return cc;
}

double agreement(const ToyModel& m, const std::vector<Utterance>& utts) {
  std::size_t same = 0;
  for (const auto& u : utts)
    same += max_search(m, u.features, LatticeKind::FrameDependent).labels ==
            sum_search(m, u.features, LatticeKind::FrameDependent, 8).labels;
  return double(same) / double(utts.size());
}

AccReport held_out_acc(const ToyModel& m, const std::vector<Utterance>& utts) {
  const double shift = 10.0;
  Timings hyp, ref;
  for (const auto& u : utts) {
    auto& rw = ref[u.id];
    for (const auto& w : u.words)
      rw.push_back({symbol_name(u.labels[w.first_label]), double(w.start_frame) * shift,
                    double(w.end_frame) * shift});
    const auto d = max_search(m, u.features, LatticeKind::FrameDependent);
    hyp[u.id] = word_timings_from_path(d.path, {}, shift).words;
  }
  const auto taus = default_taus_ms();
  return acc_tau(hyp, ref, taus);
}

bool monotone(const AccReport& r) {
  for (std::size_t k = 1; k < r.acc.size(); ++k)
    if (r.acc[k] < r.acc[k - 1]) return false;
  return true;
}

void criteria5to8(bool run7) {
  const auto train_set = generate_corpus(corpus_config(1));
  const auto held_out = generate_corpus(corpus_config(2));

  const auto t0 = std::chrono::steady_clock::now();
  const auto base = train_run(train_set, 0.0);
  const auto reg = train_run(train_set, 0.01);
  const double s = seconds_since(t0);
  report(5, reg.final_nh <= 0.5 * base.final_nh && base.start_nh >= 0.95 && reg.start_nh >= 0.95 && s < 600,
         fmt("normalized entropy lambda=0: %.4f -> %.6f, lambda=0.01: %.4f -> %.6f (ratio %.3f, need <= 0.5), %.0f s",
             base.start_nh, base.final_nh, reg.start_nh, reg.final_nh, reg.final_nh / base.final_nh, s));

  const double agree_reg = agreement(reg.model, held_out);
  const double agree_base = agreement(base.model, held_out);
  report(6, agree_reg >= 0.99 && agree_base <= agree_reg,
         fmt("max/sum label agreement on %zu held-out utterances: lambda=0.01 %.3f, lambda=0 %.3f",
             held_out.size(), agree_reg, agree_base));

  if (run7) {
    std::mt19937_64 rng(707);
    int mismatches = 0;
    for (int n = 0; n < 100; ++n) {
      const auto kind = n % 2 ? LatticeKind::FrameDependent : LatticeKind::LabelAndFrame;
      const std::size_t T = 1 + rng() % 5;
      const auto m = test::random_model(rng, 2, 1, 3, 1.5);
      const auto x = test::random_features(rng, T, 3);
      const auto all = test::enumerate_joint(m, x, kind, T);
      const auto* best = &all.front();
      std::map<std::vector<Label>, std::vector<long double>> sums;
      for (const auto& j : all) {
        if (j.score > best->score) best = &j;
        sums[j.labels].push_back(j.score);
      }
      std::vector<Label> map_y;
      long double map_s = -INFINITY;
      for (const auto& [y, v] : sums) {
        const auto s2 = test::lse(v);
        if (s2 > map_s) {
          map_s = s2;
          map_y = y;
        }
      }
      const auto mx = max_search(m, x, kind);
      const auto sm = sum_search(m, x, kind, kUnboundedBeam);
      if (mx.labels != best->labels || mx.path.steps != best->steps || std::fabs(mx.score - best->score) > 1e-9)
        ++mismatches;
      if (sm.labels != map_y || std::fabs(sm.score - double(map_s)) > 1e-9) ++mismatches;
    }
    report(7, mismatches == 0, fmt("100 instances (V=2, c=1, T<=5), %d mismatches", mismatches));
  }

  const auto acc_reg = held_out_acc(reg.model, held_out);
  const auto acc_base = held_out_acc(base.model, held_out);
  report(8, acc_reg.acc[0] >= acc_base.acc[0] && monotone(acc_reg) && monotone(acc_base),
         fmt("held-out ACC(0) lambda=0.01 %.4f vs lambda=0 %.4f; ACC(50ms) %.4f vs %.4f", acc_reg.acc[0],
             acc_base.acc[0], acc_reg.acc.back(), acc_base.acc.back()));

  // Token accuracy of the regularized model, for context.
  std::size_t errors = 0, tokens = 0;
  for (const auto& u : held_out) {
    const auto d = max_search(reg.model, u.features, LatticeKind::FrameDependent);
    errors += align_sequences(u.labels, d.labels).distance();
    tokens += u.labels.size();
  }
  std::printf("info: lambda=0.01 held-out label error rate %.4f\n", double(errors) / double(tokens));
}

void criterion9() {
  int bad = 0;
  using T = Transcripts<std::string>;
  const T ref = {{"u", {"a", "b", "c"}}};
  bad += wer(ref, ref).wer != 0.0;
  const auto del = wer(T{{"u", {"a", "c"}}}, ref);
  bad += !(del.deletions == 1 && del.substitutions == 0 && del.insertions == 0 && del.wer == 1.0 / 3.0);
  const auto si = wer(T{{"u", {"a", "x", "y"}}}, T{{"u", {"a", "b"}}});
  bad += !(si.substitutions == 1 && si.insertions == 1 && si.deletions == 0 && si.wer == 1.0);

  AlignmentPath p;
  for (std::size_t t = 0; t < 7; ++t) p.steps.push_back({t, t == 3 ? 0 : t == 5 ? 1 : kEpsilon});
  const auto words = word_timings_from_path(p, Tokenization{4}).words;
  bad += !(words.size() == 1 && words[0].word == "ab" && words[0].start == 3.0 && words[0].end == 5.0);
  bad += !word_timings_from_path(AlignmentPath{}).words.empty();

  const Timings r = {{"u", {{"a", 30, 50}}}};
  const auto taus = default_taus_ms();
  bad += acc_tau(r, r, taus).acc[0] != 1.0;
  const auto early = acc_tau(Timings{{"u", {{"a", 20, 40}}}}, r, taus);
  bad += !(early.acc[0] == 0.0 && early.acc[1] == 1.0);
  report(9, bad == 0, fmt("7 metric fixtures, %d wrong", bad));
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream is(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

void criterion10() {
  const auto dir = fs::temp_directory_path() / ("alent_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const auto pipeline = [&] {
    for (const char* cmd : {"gen", "train", "decode", "eval"}) {
      RunConfig c;
      c.command = cmd;
      c.out_dir = dir.string();
      c.num_utts = 30;
      c.steps = 30;
      c.jobs = 4;
      c.corpus = (dir / "corpus.txt").string();
      c.model = (dir / "model.txt").string();
      c.hyp = (dir / "decode.tsv").string();
      c.ref = (dir / "reference.tsv").string();
      run(c);
    }
    return snapshot(dir);
  };
  const auto a = pipeline();
  const auto b = pipeline();
  fs::remove_all(dir);
  report(10, a == b && a.size() == 7, fmt("%zu output files, %s", a.size(), a == b ? "byte-identical" : "differ"));
}

}  // namespace

int main(int argc, char** argv) {
  // --quick skips the training criteria.
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  if (!quick) criteria5to8(true);
  criterion9();
  criterion10();
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
