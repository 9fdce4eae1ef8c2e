#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "temp_dir.hpp"
#include "unprune/mia.hpp"
#include "unprune/train.hpp"

using namespace unpruning;

namespace {

struct Fixture {
  Dataset train;
  Dataset test;
  MaskedModel model;
  IndexList train_rows;
  IndexList test_rows;
};

// A wide net memorizes a small noisy 20-dim set: train accuracy 1, test near chance.
Fixture overfit(std::uint64_t seed) {
  Fixture f;
  Rng a(seed), b(seed + 100);
  f.train = gen_blobs(a, 40, 2, 20, 3.0);
  f.test = gen_blobs(b, 40, 2, 20, 3.0);
  const std::vector<Eigen::Index> dims{20, 64, 64, 2};
  f.model = init_model(mlp_specs(dims), Rng(seed + 1));
  Rng shuffle(seed + 2);
  train_sgd(f.model, f.train, all_rows(f.train), {300, 0.1, 8}, shuffle);
  f.train_rows = all_rows(f.train);
  f.test_rows = all_rows(f.test);
  return f;
}

}  // namespace

TEST(MiaFeatures, UniformOutputHasMaximalEntropy) {
  const std::vector<Eigen::Index> dims{2, 3};
  MaskedModel m = init_model(mlp_specs(dims), Rng(1));
  m.masks[0].setZero();
  Rng rng(2);
  const Dataset d = gen_blobs(rng, 5, 3, 2, 1.0);
  for (const auto& f : mia_features(m, d, all_rows(d))) {
    EXPECT_NEAR(f.entropy, std::log(3.0), 1e-12);
    EXPECT_NEAR(f.confidence, 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(f.probability, 1.0 / 3.0, 1e-12);
  }
}

TEST(MiaFeatures, ConfidentCorrectPredictionHasTinyModifiedEntropy) {
  const std::vector<Eigen::Index> dims{1, 2};
  MaskedModel m = init_model(mlp_specs(dims), Rng(1));
  m.masks[0].setZero();
  m.biases[0] << 30.0, 0.0;
  Dataset d;
  d.inputs = Matrix::Zero(2, 1);
  d.labels = {0, 1};
  d.num_classes = 2;
  const auto f = mia_features(m, d, all_rows(d));
  EXPECT_LT(f[0].m_entropy, 1e-9);
  EXPECT_TRUE(f[0].correct);
  EXPECT_GT(f[1].m_entropy, 10.0);  // confidently wrong
  EXPECT_FALSE(f[1].correct);
}

TEST(MiaEvaluate, ScoresAreFractionsAndDeterministic) {
  const Fixture f = overfit(3);
  const Rng rng(9);
  const MiaReport a = mia_evaluate(f.model, {f.train, f.train_rows}, {f.test, f.test_rows}, 0.5, rng);
  const MiaReport b = mia_evaluate(f.model, {f.train, f.train_rows}, {f.test, f.test_rows}, 0.5, rng);
  for (std::size_t c = 0; c < kMiaChannels; ++c) {
    EXPECT_GE(a.score[c], 0.0);
    EXPECT_LE(a.score[c], 1.0);
    EXPECT_GE(a.balanced[c], 0.0);
    EXPECT_LE(a.balanced[c], 1.0);
    EXPECT_EQ(a.score[c], b.score[c]);
  }
  EXPECT_EQ(a.n_member, 40u);
  EXPECT_EQ(a.n_nonmember, 80u);
  EXPECT_FALSE(a.resampled);
}

TEST(MiaEvaluate, OverfitModelLeaksMembership) {
  const Fixture f = overfit(4);
  const MiaReport r = mia_evaluate(f.model, {f.train, f.train_rows}, {f.test, f.test_rows}, 1.0, Rng(1));
  EXPECT_GT(r.balanced[static_cast<std::size_t>(MiaChannel::kMEntropy)], 0.7);
}

TEST(MiaEvaluate, PermutedMembershipLabelsScoreAtChance) {
  const Fixture f = overfit(5);
  IndexList rows = f.train_rows;
  std::vector<MiaFeatures> feats = mia_features(f.model, f.train, rows);
  const auto more = mia_features(f.model, f.test, f.test_rows);
  feats.insert(feats.end(), more.begin(), more.end());
  double total[kMiaChannels] = {};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<int> label(feats.size(), 0);
    for (std::size_t i = 0; i < feats.size() / 2; ++i) label[i] = 1;
    for (std::size_t i = label.size(); i > 1; --i) std::swap(label[i - 1], label[rng.below(i)]);
    const MiaReport r = mia_evaluate_features(feats, label, 1.0, Rng(seed + 500));
    for (std::size_t c = 0; c < kMiaChannels; ++c) total[c] += r.balanced[c];
  }
  for (std::size_t c = 0; c < kMiaChannels; ++c) EXPECT_NEAR(total[c] / 20, 0.5, 0.1) << kMiaChannelNames[c];
}

TEST(MiaEvaluate, NoGeneralizationGapIsChanceAtEvenRatio) {
  // Members and non-members drawn from the same distribution, never trained on.
  Rng a(6), b(7);
  const Dataset members = gen_blobs(a, 500, 2, 2, 1.0);
  const Dataset nonmembers = gen_blobs(b, 500, 2, 2, 1.0);
  const std::vector<Eigen::Index> dims{2, 16, 2};
  const MaskedModel m = init_model(mlp_specs(dims), Rng(8));
  double total[kMiaChannels] = {};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const MiaReport r = mia_evaluate(m, {members, all_rows(members)}, {nonmembers, all_rows(nonmembers)}, 1.0, Rng(seed));
    for (std::size_t c = 0; c < kMiaChannels; ++c) total[c] += r.balanced[c];
  }
  for (std::size_t c = 0; c < kMiaChannels; ++c) EXPECT_NEAR(total[c] / 10, 0.5, 0.05) << kMiaChannelNames[c];
}

TEST(MiaEvaluate, ResamplesWhenMembersAreScarce) {
  const Fixture f = overfit(9);
  const MiaReport r = mia_evaluate(f.model, {f.train, f.train_rows}, {f.test, f.test_rows}, 1.5, Rng(2));
  EXPECT_TRUE(r.resampled);
  EXPECT_EQ(r.n_member, 120u);
}

TEST(MiaEvaluate, TinyPoolsAndBadRatiosAreInputErrors) {
  const Fixture f = overfit(10);
  const IndexList one{0};
  EXPECT_THROW(mia_evaluate(f.model, {f.train, one}, {f.test, one}, 1.0, Rng(1)), InputError);
  EXPECT_THROW(mia_evaluate(f.model, {f.train, f.train_rows}, {f.test, f.test_rows}, 0.0, Rng(1)), InputError);
  EXPECT_THROW(mia_evaluate(f.model, {f.train, {}}, {f.test, f.test_rows}, 1.0, Rng(1)), InputError);
}

TEST(RatioSweep, NinePointsIndependentOfSweepComposition) {
  const Fixture f = overfit(11);
  std::vector<double> ratios;
  for (int i = 1; i <= 9; ++i) ratios.push_back(0.1 * i);
  const auto sweep = ratio_sweep(f.model, {f.train, f.train_rows}, {f.test, f.test_rows}, ratios, Rng(3));
  ASSERT_EQ(sweep.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(sweep[i].ratio, ratios[i]);
  const std::vector<double> just_one{ratios[4]};
  const auto single = ratio_sweep(f.model, {f.train, f.train_rows}, {f.test, f.test_rows}, just_one, Rng(3));
  EXPECT_EQ(single[0].score, sweep[4].score);
  EXPECT_THROW(ratio_sweep(f.model, {f.train, f.train_rows}, {f.test, f.test_rows}, {}, Rng(3)), InputError);
}

TEST(RatioSweep, LogisticAttackerAlsoProducesFractions) {
  const Fixture f = overfit(12);
  MiaOptions opt;
  opt.attacker = MiaAttacker::kLogistic;
  const MiaReport r = mia_evaluate(f.model, {f.train, f.train_rows}, {f.test, f.test_rows}, 0.2, Rng(1), opt);
  for (double s : r.score) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(SweepCsv, HeaderAndRowCount) {
  TempDir dir("sweep");
  std::vector<MiaReport> sweep(3);
  for (std::size_t i = 0; i < 3; ++i) sweep[i].ratio = 0.5 * static_cast<double>(i + 1);
  write_sweep_csv(sweep, dir / "s.csv");
  std::ifstream in(dir / "s.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "ratio,correctness,confidence,entropy,m_entropy,probability");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 3);
}
