#include <gtest/gtest.h>

#include <random>

#include "alent/corpus.hpp"
#include "alent/train.hpp"
#include "support.hpp"

using namespace alent;

namespace {

std::vector<Utterance> tiny_corpus(std::size_t n, std::uint64_t seed = 1) {
  CorpusConfig cc;
  cc.seed = seed;
  cc.num_utts = n;
  cc.t_min = 8;
  cc.t_max = 10;
  cc.u_min = 2;
  cc.u_max = 3;
  return generate_corpus(cc);
}

ModelConfig small_config() {
  ModelConfig mc;
  mc.hidden = 8;
  return mc;
}

}  // namespace

TEST(LossAndGrad, ZeroLambdaIsNll) {
  const auto utts = tiny_corpus(3);
  const auto m = ToyModel::random_init(small_config(), 1, 0.5);
  const auto r = loss_and_grad(m, utts, 0.0);
  EXPECT_EQ(r.loss, r.mean_nll);
  EXPECT_GT(r.mean_entropy, 0.0);
}

TEST(LossAndGrad, LossCombinesTerms) {
  const auto utts = tiny_corpus(3);
  const auto m = ToyModel::random_init(small_config(), 1, 0.5);
  const auto r = loss_and_grad(m, utts, 0.25);
  EXPECT_NEAR(r.loss, r.mean_nll + 0.25 * r.mean_entropy, 1e-12);
}

TEST(LossAndGrad, NegativeLambdaRejected) {
  const auto utts = tiny_corpus(1);
  const ToyModel m{small_config()};
  try {
    loss_and_grad(m, utts, -0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

TEST(LossAndGrad, MatchesFiniteDifferences) {
  CorpusConfig cc;
  cc.num_utts = 2;
  cc.t_min = 4;
  cc.t_max = 8;
  cc.u_min = 1;
  cc.u_max = 3;
  cc.feature_dim = 3;
  const auto utts = generate_corpus(cc);
  ModelConfig mc;
  mc.feature_dim = 3;
  mc.hidden = 3;
  mc.context = 1;
  for (auto kind : {LatticeKind::FrameDependent, LatticeKind::LabelAndFrame}) {
    const auto m = ToyModel::random_init(mc, 17, 0.8);
    const auto r = loss_and_grad(m, utts, 0.3, kind);
    auto probe = m;
    auto blocks = r.grad.flat_blocks();
    std::size_t b = 0;
    probe.params().for_each_block([&](const char* name, std::vector<double>& p) {
      const auto& g = *blocks[b++];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double p0 = p[i];
        p[i] = p0 + 1e-5;
        const double fp = loss_and_grad(probe, utts, 0.3, kind).loss;
        p[i] = p0 - 1e-5;
        const double fm = loss_and_grad(probe, utts, 0.3, kind).loss;
        p[i] = p0;
        EXPECT_NEAR(g[i], (fp - fm) / 2e-5, 1e-4) << to_string(kind) << " " << name << "[" << i << "]";
      }
    });
  }
}

TEST(LossAndGrad, IndependentOfJobs) {
  const auto utts = tiny_corpus(9);
  const auto m = ToyModel::random_init(small_config(), 2, 0.5);
  const auto a = loss_and_grad(m, utts, 0.01, LatticeKind::FrameDependent, 1);
  const auto b = loss_and_grad(m, utts, 0.01, LatticeKind::FrameDependent, 4);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.grad, b.grad);
}

TEST(LossAndGrad, EmptyBatch) {
  const ToyModel m{small_config()};
  const auto r = loss_and_grad(m, {}, 0.01);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.grad, ModelParams::zeros(small_config()));
}

TEST(Train, NllNonIncreasingOnOneUtterance) {
  const auto utts = tiny_corpus(1);
  TrainConfig tc;
  tc.lambda = 0.0;
  tc.steps = 50;
  tc.step_size = 0.05;
  const auto r = train(ToyModel::random_init(small_config(), 4, 0.1), utts, tc);
  ASSERT_EQ(r.curve.size(), 50u);
  for (std::size_t i = 1; i < r.curve.size(); ++i) EXPECT_LE(r.curve[i].loss, r.curve[i - 1].loss + 1e-12);
}

TEST(Train, Deterministic) {
  const auto utts = tiny_corpus(4);
  TrainConfig tc;
  tc.steps = 20;
  tc.jobs = 3;
  const auto init = ToyModel::random_init(small_config(), 5, 0.1);
  const auto a = train(init, utts, tc);
  const auto b = train(init, utts, tc);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.curve.back().loss, b.curve.back().loss);
}

TEST(Train, ZeroStepsReturnsInitialModel) {
  const auto utts = tiny_corpus(2);
  TrainConfig tc;
  tc.steps = 0;
  const auto init = ToyModel::random_init(small_config(), 6, 0.1);
  const auto r = train(init, utts, tc);
  EXPECT_EQ(r.model, init);
  EXPECT_TRUE(r.curve.empty());
}

TEST(Train, NonPositiveStepSizeRejected) {
  TrainConfig tc;
  tc.step_size = 0.0;
  EXPECT_THROW(train(ToyModel{small_config()}, {}, tc), Error);
}

TEST(Train, StrongRegularizerCollapsesEntropy) {
  const auto utts = tiny_corpus(4);
  const auto init = ToyModel::random_init(small_config(), 3, 0.1);
  TrainConfig tc;
  tc.steps = 100;
  tc.step_size = 0.2;
  tc.lambda = 0.0;
  const auto plain = train(init, utts, tc);
  tc.lambda = 10.0;
  const auto reg = train(init, utts, tc);
  const double h_plain = loss_and_grad(plain.model, utts, 0.0).mean_entropy;
  const double h_reg = loss_and_grad(reg.model, utts, 0.0).mean_entropy;
  EXPECT_LT(h_reg, 0.01);
  EXPECT_GT(h_plain, 0.1);
}

TEST(Train, CurveStartsNearMaximumAndFalls) {
  const auto utts = tiny_corpus(4);
  TrainConfig tc;
  tc.lambda = 0.0;
  tc.steps = 60;
  tc.step_size = 0.2;
  const auto r = train(ToyModel::random_init(small_config(), 7, 0.01), utts, tc);
  EXPECT_GT(r.curve.front().mean_normalized_entropy, 0.95);
  EXPECT_LT(r.curve.back().mean_normalized_entropy, r.curve.front().mean_normalized_entropy);
  EXPECT_LT(r.curve.back().loss, r.curve.front().loss);
}
