#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "unprune/prune.hpp"
#include "unprune/train.hpp"
#include "unprune/unlearn.hpp"

using namespace unpruning;

namespace {

struct Fixture {
  Dataset data;
  DeletionSplit split;
  MaskedModel model;
};

Fixture trained(std::uint64_t seed, int epochs = 30) {
  Fixture f;
  Rng data_rng(seed);
  f.data = gen_blobs(data_rng, 100, 2, 2, 1.0);
  Rng split_rng(seed + 1);
  f.split = split_delete(f.data, 0.1, split_rng);
  const std::vector<Eigen::Index> dims{2, 16, 2};
  f.model = init_model(mlp_specs(dims), Rng(seed + 2));
  Rng shuffle(seed + 3);
  train_sgd(f.model, f.data, all_rows(f.data), {epochs, 0.1, 16}, shuffle);
  return f;
}

double forget_loss(const Fixture& f, const MaskedModel& m) {
  return evaluate(m, f.data, f.split.forget).loss;
}

UnlearnConfig config(UnlearnMethod method, int steps, double rate) {
  UnlearnConfig c;
  c.method = method;
  c.steps = steps;
  c.rate = rate;
  return c;
}

}  // namespace

TEST(Unlearn, NoopLeavesModelUntouched) {
  Fixture f = trained(1);
  const MaskedModel before = f.model;
  Rng rng(1);
  unlearn(f.model, f.split, f.data, config(UnlearnMethod::kNoop, 0, 0.0), rng);
  EXPECT_EQ(f.model.weights, before.weights);
  EXPECT_EQ(f.model.biases, before.biases);
}

TEST(Unlearn, EveryMethodIsDeterministicForFixedSeed) {
  for (auto method : {UnlearnMethod::kGradientAscent, UnlearnMethod::kFisherForgetting, UnlearnMethod::kFinetune}) {
    Fixture f = trained(2, 5);
    MaskedModel a = f.model, b = f.model;
    Rng ra(9), rb(9);
    unlearn(a, f.split, f.data, config(method, 5, 0.01), ra);
    unlearn(b, f.split, f.data, config(method, 5, 0.01), rb);
    EXPECT_EQ(a.weights, b.weights) << to_string(method);
    EXPECT_EQ(a.biases, b.biases) << to_string(method);
  }
}

TEST(GradientAscent, RaisesForgetLossEachStep) {
  Fixture f = trained(3);
  double prev = forget_loss(f, f.model);
  for (int s = 0; s < 10; ++s) {
    unlearn_gradient_ascent(f.model, f.data, f.split.forget, 1, 0.01);
    const double now = forget_loss(f, f.model);
    EXPECT_GT(now, prev) << "step " << s;
    prev = now;
  }
}

TEST(GradientAscent, ZeroRateIsIdentity) {
  Fixture f = trained(4, 5);
  const MaskedModel before = f.model;
  unlearn_gradient_ascent(f.model, f.data, f.split.forget, 10, 0.0);
  EXPECT_EQ(f.model.weights, before.weights);
}

TEST(GradientAscent, FirstOrderIncreaseMatchesSquaredGradientNorm) {
  // For a small step, L(theta + eta g) - L(theta) ~= eta ||g||^2.
  Fixture f = trained(5);
  const double eta = 1e-4;
  const Matrix x = f.data.gather_inputs(f.split.forget);
  const auto y = f.data.gather_labels(f.split.forget);
  const double before = oracle::model_loss(f.model, x, y);
  const double g2 = backward(f.model, x, y).grad.squared_norm();
  unlearn_gradient_ascent(f.model, f.data, f.split.forget, 1, eta);
  const double after = oracle::model_loss(f.model, x, y);
  EXPECT_NEAR((after - before) / (eta * g2), 1.0, 0.1);
}

TEST(GradientAscent, ManyStepsLowerForgetAccuracy) {
  Fixture f = trained(6);
  const double ua0 = evaluate(f.model, f.data, f.split.forget).accuracy;
  unlearn_gradient_ascent(f.model, f.data, f.split.forget, 50, 0.05);
  EXPECT_LT(evaluate(f.model, f.data, f.split.forget).accuracy, ua0);
}

TEST(GradientAscent, DivergenceNamesTheStep) {
  Fixture f = trained(7, 5);
  try {
    unlearn_gradient_ascent(f.model, f.data, f.split.forget, 100, 1e200);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step "), std::string::npos) << e.what();
  }
}

TEST(GradientAscent, EmptyForgetSetIsInputError) {
  Fixture f = trained(8, 1);
  EXPECT_THROW(unlearn_gradient_ascent(f.model, f.data, {}, 1, 0.1), InputError);
}

TEST(FisherDiag, NonNegativeAndMatchesPerSampleOracle) {
  Fixture f = trained(9, 5);
  const IndexList rows(f.split.forget.begin(), f.split.forget.begin() + 5);
  const GradientSet fisher = fisher_diag(f.model, rows, f.data);
  GradientSet expect = GradientSet::zeros_like(f.model);
  for (Index r : rows) {
    // Per-sample gradient by central differences on the loop-based forward pass.
    const Matrix x = f.data.gather_inputs({r});
    const auto y = f.data.gather_labels({r});
    MaskedModel probe = f.model;
    for (std::size_t l = 0; l < probe.num_layers(); ++l) {
      const Matrix g = oracle::central_difference(probe.weights[l], [&] { return oracle::model_loss(probe, x, y); });
      expect.weights[l] += g.cwiseAbs2();
    }
  }
  expect *= 1.0 / static_cast<double>(rows.size());
  for (std::size_t l = 0; l < f.model.num_layers(); ++l) {
    EXPECT_TRUE((fisher.weights[l].array() >= 0).all());
    EXPECT_LT((fisher.weights[l] - expect.weights[l]).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(FisherDiag, DeadUnitHasZeroFisherOnItsWeights) {
  Fixture f = trained(10, 5);
  // Kill hidden unit 3: zero incoming weights and a very negative bias keep it off.
  f.model.weights[0].row(3).setZero();
  f.model.biases[0](3) = -100.0;
  const GradientSet fisher = fisher_diag(f.model, f.split.retain, f.data);
  EXPECT_TRUE((fisher.weights[0].row(3).array() == 0.0).all());
  EXPECT_TRUE((fisher.weights[1].col(3).array() == 0.0).all());
}

TEST(FisherDiag, DuplicatingRowsLeavesEstimateUnchanged) {
  Fixture f = trained(11, 5);
  IndexList rows(f.split.retain.begin(), f.split.retain.begin() + 10);
  IndexList twice = rows;
  twice.insert(twice.end(), rows.begin(), rows.end());
  const GradientSet a = fisher_diag(f.model, rows, f.data);
  const GradientSet b = fisher_diag(f.model, twice, f.data);
  for (std::size_t l = 0; l < f.model.num_layers(); ++l) {
    EXPECT_LT((a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(FisherForgetting, ZeroNoiseIsIdentity) {
  Fixture f = trained(12, 5);
  const MaskedModel before = f.model;
  UnlearnConfig c = config(UnlearnMethod::kFisherForgetting, 1, 0.01);
  c.fisher_noise_scale = 0.0;
  Rng rng(1);
  unlearn(f.model, f.split, f.data, c, rng);
  EXPECT_EQ(f.model.weights, before.weights);
}

TEST(FisherForgetting, LowFisherParametersGetMoreNoise) {
  Fixture f = trained(13, 10);
  UnlearnConfig c = config(UnlearnMethod::kFisherForgetting, 1, 0.01);
  c.fisher_noise_scale = 1e-3;
  const GradientSet fisher = fisher_diag(f.model, f.split.retain, f.data);
  // Average absolute perturbation over 40 draws, then compare the quartiles of F.
  std::vector<std::pair<double, double>> by_fisher;  // (F, mean |delta|)
  const Matrix w0 = f.model.weights[0];
  Matrix acc = Matrix::Zero(w0.rows(), w0.cols());
  for (int draw = 0; draw < 40; ++draw) {
    MaskedModel m = f.model;
    Rng rng(100 + static_cast<std::uint64_t>(draw));
    unlearn(m, f.split, f.data, c, rng);
    acc += (m.weights[0] - w0).cwiseAbs();
  }
  for (Eigen::Index i = 0; i < w0.size(); ++i) by_fisher.push_back({fisher.weights[0].data()[i], acc.data()[i] / 40});
  std::sort(by_fisher.begin(), by_fisher.end());
  const std::size_t q = by_fisher.size() / 4;
  double low = 0, high = 0;
  for (std::size_t i = 0; i < q; ++i) {
    low += by_fisher[i].second;
    high += by_fisher[by_fisher.size() - 1 - i].second;
  }
  EXPECT_GT(low, high);
}

TEST(Finetune, RetainLossDecreasesOnAverage) {
  Fixture f = trained(14, 2);
  const double before = evaluate(f.model, f.data, f.split.retain).loss;
  Rng rng(3);
  unlearn_finetune(f.model, f.data, f.split.retain, 50, 0.05, 32, rng);
  EXPECT_LT(evaluate(f.model, f.data, f.split.retain).loss, before);
}

TEST(Unlearn, MaskedWeightsStayFrozenForEveryMethod) {
  for (auto method : {UnlearnMethod::kGradientAscent, UnlearnMethod::kFisherForgetting,
                      UnlearnMethod::kFinetune, UnlearnMethod::kNoop}) {
    Fixture f = trained(15, 5);
    prune_magnitude(f.model, 0.5);
    Rng rng(4);
    unlearn(f.model, f.split, f.data, config(method, 10, 0.05), rng);
    for (std::size_t l = 0; l < f.model.num_layers(); ++l) {
      for (Eigen::Index i = 0; i < f.model.masks[l].size(); ++i) {
        if (f.model.masks[l].data()[i] == 0.0) {
          ASSERT_EQ(f.model.weights[l].data()[i], 0.0) << to_string(method);
        }
      }
    }
  }
}

TEST(UnlearnConfig, ValidationAndNames) {
  EXPECT_THROW(config(UnlearnMethod::kGradientAscent, 5, 0.0).validate(), ConfigError);
  EXPECT_THROW(config(UnlearnMethod::kFinetune, 0, 0.1).validate(), ConfigError);
  EXPECT_NO_THROW(config(UnlearnMethod::kNoop, 0, 0.0).validate());
  EXPECT_THROW(unlearn_method_from_string("magic"), ConfigError);
  for (auto m : {UnlearnMethod::kGradientAscent, UnlearnMethod::kFisherForgetting,
                 UnlearnMethod::kFinetune, UnlearnMethod::kNoop}) {
    EXPECT_EQ(unlearn_method_from_string(to_string(m)), m);
  }
}
