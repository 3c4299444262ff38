#include <gtest/gtest.h>

#include "acsr/train.hpp"
#include "test_support.hpp"

using namespace acsr;
using testing_support::vocab;

namespace {

TrainingSample random_sample(Rng& rng, std::size_t frames, std::size_t d, std::size_t target_len) {
  TrainingSample s;
  s.lip.values.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < s.lip.values.size(); ++i) s.lip.values.data()[i] = rng.normal();
  s.hand = HandMatrix::zeros(frames);
  for (Eigen::Index i = 0; i < s.hand.values.size(); ++i) s.hand.values.data()[i] = rng.uniform() < 0.1 ? 1.0 : 0.0;
  for (std::size_t i = 0; i < target_len; ++i) {
    std::size_t label = 1 + rng.index(kHandDim);
    if (!s.target.empty() && label == s.target.back()) label = label % kHandDim + 1;
    s.target.push_back(label);
  }
  return s;
}

double sample_loss(const TrainingSample& s, const FusionParams& p) {
  auto grad = zero_like(p);
  return accumulate_gradient(s, p, grad);
}

void expect_same(const FusionParams& a, const FusionParams& b) {
  EXPECT_EQ(a.linear_weights, b.linear_weights);
  EXPECT_EQ(a.linear_bias, b.linear_bias);
  EXPECT_EQ(a.lambda, b.lambda);
  EXPECT_EQ(a.head_weights, b.head_weights);
  EXPECT_EQ(a.head_bias, b.head_bias);
}

std::vector<TrainingSample> random_set(std::uint64_t seed, std::size_t n, std::size_t d) {
  Rng rng(seed);
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_sample(rng, 10 + rng.index(10), d, 1 + rng.index(4)));
  return out;
}

}  // namespace

TEST(AccumulateGradient, LossMatchesDenseForwardPass) {
  Rng rng(1);
  const auto s = random_sample(rng, 9, 7, 3);
  auto p = FusionParams::initial(7, 2);
  p.lambda = 0.8;
  const double dense = ctc_loss(sample_logits(s.lip, s.hand, p), s.target).loss / 3.0;
  EXPECT_NEAR(sample_loss(s, p), dense, 1e-12);
}

TEST(AccumulateGradient, MatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 3; ++trial) {
    const auto s = random_sample(rng, 8, 5, 1 + rng.index(3));
    auto p = FusionParams::initial(5, rng.bits());
    p.lambda = rng.uniform(0.5, 1.5);
    auto grad = zero_like(p);
    accumulate_gradient(s, p, grad);
    const double h = 1e-6;
    auto check = [&](double& param, double analytic, const char* what) {
      const double saved = param;
      param = saved + h;
      const double up = sample_loss(s, p);
      param = saved - h;
      const double down = sample_loss(s, p);
      param = saved;
      EXPECT_NEAR(analytic, (up - down) / (2 * h), 1e-6) << what;
    };
    for (Eigen::Index i = 0; i < p.linear_weights.size(); ++i) check(p.linear_weights.data()[i], grad.linear_weights.data()[i], "W");
    for (Eigen::Index i = 0; i < p.linear_bias.size(); ++i) check(p.linear_bias.data()[i], grad.linear_bias.data()[i], "b");
    for (Eigen::Index i = 0; i < p.head_weights.size(); ++i) check(p.head_weights.data()[i], grad.head_weights.data()[i], "Wh");
    for (Eigen::Index i = 0; i < p.head_bias.size(); ++i) check(p.head_bias.data()[i], grad.head_bias.data()[i], "bh");
    check(p.lambda, grad.lambda, "lambda");
  }
}

TEST(AccumulateGradient, RejectsNonBinaryHand) {
  Rng rng(2);
  auto s = random_sample(rng, 6, 4, 2);
  s.hand.values(0, 0) = 0.5;
  auto p = FusionParams::initial(4, 1);
  auto grad = zero_like(p);
  EXPECT_THROW(accumulate_gradient(s, p, grad), ValidationError);
}

TEST(TrainHead, ZeroLearningRateLeavesParametersUnchanged) {
  const auto set = random_set(4, 6, 8);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  const auto initial = FusionParams::initial(8, 5);
  expect_same(train_head(set, cfg, initial), initial);
}

TEST(TrainHead, OverfitsASingleSample) {
  Rng rng(6);
  const std::vector<TrainingSample> one = {random_sample(rng, 12, 16, 4)};
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.learning_rate = 0.5;
  cfg.epochs = 400;
  TrainReport report;
  const auto p = train_head(one, cfg, &report);
  ASSERT_EQ(report.epoch_losses.size(), 400u);
  EXPECT_LT(report.epoch_losses.back(), report.epoch_losses.front());
  EXPECT_LT(sample_loss(one[0], p), 0.01);
  EXPECT_EQ(greedy_decode(sample_logits(one[0].lip, one[0].hand, p)), one[0].target);
}

TEST(TrainHead, DeterministicAndIndependentOfJobs) {
  const auto set = random_set(7, 13, 12);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 9;
  const auto a = train_head(set, cfg);
  const auto b = train_head(set, cfg);
  expect_same(a, b);
  cfg.jobs = 4;
  expect_same(train_head(set, cfg), a);
  cfg.jobs = 1;
  cfg.seed = 10;
  EXPECT_NE(train_head(set, cfg).head_weights, a.head_weights);
}

TEST(TrainHead, Rejections) {
  TrainConfig cfg;
  EXPECT_THROW(train_head(std::vector<TrainingSample>{}, cfg), ValidationError);
  auto set = random_set(1, 2, 6);
  set[1].hand = HandMatrix::zeros(set[1].lip.frames() + 1);
  EXPECT_THROW(train_head(set, cfg), ValidationError);
  set = random_set(1, 2, 6);
  set[0].target.assign(set[0].lip.frames() + 1, 1);
  EXPECT_THROW(train_head(set, cfg), ValidationError);
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = TrainConfig{};
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(TrainHead, DivergenceIsReported) {
  auto set = random_set(2, 4, 6);
  for (auto& s : set) s.lip.values *= 1e200;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.learning_rate = 1e10;
  EXPECT_THROW(train_head(set, cfg), TrainingDiverged);
}

TEST(TranscriptTarget, IncludesWordBoundaries) {
  const auto t = Transcript::parse_line("b a / m a");
  const auto target = transcript_target(t, vocab());
  ASSERT_EQ(target.size(), 5u);
  EXPECT_EQ(target[2], vocab().word_boundary());
  EXPECT_EQ(target[0], vocab().index("b"));
  const auto decoded = Transcript::from_tokens(std::vector<std::string>{"b", "a", "/", "m", "a"});
  EXPECT_EQ(decoded, t);
}
