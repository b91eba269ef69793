#include <gtest/gtest.h>

#include <cmath>

#include "protonet/error.hpp"
#include "protonet/hierarchy.hpp"
#include "protonet/synthetic.hpp"
#include "protonet/trainer.hpp"
#include "support.hpp"

using namespace protonet;
using testing_support::batch;
using testing_support::vec;

namespace {

SyntheticData tiny(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.dim = 6;
  spec.samples_per_leaf = 6;
  spec.novel_classes = 3;
  spec.val_classes = 3;
  spec.seed = seed;
  return make_synthetic(spec);
}

HeadConfig head(Metric m) {
  HeadConfig cfg;
  cfg.metric = m;
  return cfg;
}

constexpr Metric kAllHeads[] = {Metric::euclidean, Metric::cosine, Metric::hierarchical, Metric::hyperbolic};

}  // namespace

TEST(Projection, IdentityAndZero) {
  const Vector x = vec({1.5, -2.0, 0.25});
  EXPECT_EQ(forward_project(ProjectionModel::identity(3), x), x);
  ProjectionModel zero{Matrix::Zero(3, 3), Vector::Zero(3)};
  EXPECT_EQ(forward_project(zero, x), Vector::Zero(3));
}

TEST(Projection, HandProduct) {
  ProjectionModel m{Matrix(2, 3), vec({0.5, -1.0})};
  m.weight << 1, 2, 3, 4, 5, 6;
  const Vector y = forward_project(m, vec({1.0, 0.0, -1.0}));
  EXPECT_EQ(y, vec({1.0 - 3.0 + 0.5, 4.0 - 6.0 - 1.0}));
  EXPECT_THROW(forward_project(m, vec({1.0, 2.0})), Error);
}

TEST(Projection, InitializationRange) {
  const auto m = ProjectionModel::initialize(10, 6, 3);
  const double bound = std::sqrt(6.0 / 16.0);
  EXPECT_LE(m.weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(m.bias, Vector::Zero(6));
  EXPECT_EQ(m.weight, ProjectionModel::initialize(10, 6, 3).weight);
  EXPECT_NE(m.weight, ProjectionModel::initialize(10, 6, 4).weight);
}

TEST(LossAndGradients, LossMatchesHeads) {
  const auto s = tiny(1);
  for (Metric m : kAllHeads) {
    const Episode ep = sample_episode_at(s.data, s.split.base, EpisodeShape{3, 2, 2}, 5, 0);
    const auto model = ProjectionModel::initialize(6, 4, 2);
    const HeadConfig cfg = head(m);
    const Episode projected = project(model, ep);
    const double expected =
        episode_loss(projected, build_prototypes(projected.support, cfg, s.hierarchy), s.hierarchy, cfg);
    EXPECT_NEAR(loss_and_gradients(model, ep, cfg, s.hierarchy).loss, expected, 1e-12) << to_string(m);
  }
}

TEST(LossAndGradients, CollapsedModelGivesLogK) {
  const auto s = tiny(2);
  const ProjectionModel zero{Matrix::Zero(3, 6), Vector::Zero(3)};
  for (Metric m : kAllHeads) {
    const Episode ep = sample_episode_at(s.data, s.split.base, EpisodeShape{3, 2, 2}, 1, 0);
    const auto g = loss_and_gradients(zero, ep, head(m), s.hierarchy);
    double expected = std::log(3.0);
    if (m == Metric::hierarchical) {
      std::set<std::string> supers;
      for (const auto& c : ep.classes) supers.insert(s.hierarchy.ancestor_at_level(c, 2));
      const auto w = level_weights(2.0, 3);
      expected = w.at(2) * std::log(static_cast<double>(supers.size())) + w.at(3) * std::log(3.0);
    }
    EXPECT_NEAR(g.loss, expected, 1e-12) << to_string(m);
    EXPECT_TRUE(g.weight.allFinite());
    EXPECT_TRUE(g.bias.allFinite());
  }
}

TEST(LossAndGradients, FiniteDifferencesTenSeeds) {
  for (Metric m : kAllHeads) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = tiny(100 + seed);
      const int ways = 2 + static_cast<int>(seed % 4);
      const Episode ep = sample_episode_at(s.data, s.split.base, EpisodeShape{std::min(ways, 3), 2, 2}, seed, 0);
      const auto model = ProjectionModel::initialize(6, 2 + static_cast<Eigen::Index>(seed % 7), seed);
      const auto report = finite_difference_check(model, ep, head(m), s.hierarchy, 1e-6, default_gradcheck_threshold(m));
      EXPECT_TRUE(report.passed) << to_string(m) << " seed " << seed << " err " << report.max_rel_error;
      EXPECT_EQ(report.parameters, static_cast<std::size_t>(model.weight.size() + model.bias.size()));
    }
  }
}

TEST(LossAndGradients, HyperbolicCoincidentQueryIsSingular) {
  Episode ep;
  ep.classes = {"a", "b"};
  ep.support = batch({vec({0.0, 0.0}), vec({1.0, 0.0})}, {"a", "b"});
  ep.query = batch({vec({0.0, 0.0})}, {"a"});
  const auto h = testing_support::flat_tree({"a", "b"});
  try {
    loss_and_gradients(ProjectionModel::identity(2), ep, head(Metric::hyperbolic), h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::gradient_singularity);
  }
  // The Euclidean head takes the zero subgradient instead.
  const auto g = loss_and_gradients(ProjectionModel::identity(2), ep, head(Metric::euclidean), h);
  EXPECT_TRUE(g.weight.allFinite());
}

TEST(LossAndGradients, HalvingTemperatureKeepsPredictions) {
  const auto s = tiny(3);
  const Episode ep = project(ProjectionModel::initialize(6, 4, 1), sample_episode_at(s.data, s.split.base, EpisodeShape{3, 2, 3}, 2, 0));
  for (Metric m : {Metric::euclidean, Metric::hyperbolic}) {
    HeadConfig a = head(m), b = head(m);
    b.tau = a.tau / 2;
    const auto pa = build_prototypes(ep.support, a, s.hierarchy);
    const auto pb = build_prototypes(ep.support, b, s.hierarchy);
    for (Eigen::Index i = 0; i < ep.query.size(); ++i) {
      const Vector la = class_logits(ep.query.x.col(i), pa.leaf(), a);
      const Vector lb = class_logits(ep.query.x.col(i), pb.leaf(), b);
      EXPECT_LT((lb - 2.0 * la).norm(), 1e-12 * (1.0 + la.norm()));
      EXPECT_EQ(argmax(la), argmax(lb));
    }
  }
}

TEST(GradCheck, ZeroStepRejected) {
  const auto s = tiny(4);
  const Episode ep = sample_episode_at(s.data, s.split.base, EpisodeShape{3, 1, 1}, 0, 0);
  try {
    finite_difference_check(ProjectionModel::identity(6), ep, HeadConfig{}, s.hierarchy, 0.0, 1e-5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
  }
}

TEST(GradCheck, SpecExamples) {
  const auto s = tiny(5);
  const Episode ep = sample_episode_at(s.data, s.split.base, EpisodeShape{3, 2, 2}, 5, 0);
  const auto model = ProjectionModel::initialize(6, 4, 5);
  EXPECT_LT(finite_difference_check(model, ep, head(Metric::euclidean), s.hierarchy, 1e-6, 1e-5).max_rel_error, 1e-5);
  HeadConfig hyp = head(Metric::hyperbolic);
  hyp.c = 0.01;
  hyp.r = 1.0;
  EXPECT_LT(finite_difference_check(model, ep, hyp, s.hierarchy, 1e-6, 1e-4).max_rel_error, 1e-4);
}

TEST(Sgd, PlainStep) {
  ProjectionModel m{Matrix::Constant(1, 1, 1.0), vec({2.0})};
  auto st = OptimizerState::zeros_like(m);
  Gradients g{0.0, Matrix::Constant(1, 1, 0.5), vec({-1.0})};
  sgd_step(m, g, st, SgdConfig{0.1, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(m.weight(0, 0), 0.95);
  EXPECT_DOUBLE_EQ(m.bias[0], 2.1);
}

TEST(Sgd, ZeroGradientKeepsParamsAndDecaysVelocity) {
  ProjectionModel m{Matrix::Constant(1, 1, 1.0), vec({0.0})};
  auto st = OptimizerState::zeros_like(m);
  st.weight_velocity(0, 0) = 0.0;
  Gradients zero{0.0, Matrix::Zero(1, 1), Vector::Zero(1)};
  sgd_step(m, zero, st, SgdConfig{0.1, 0.9, 0.0});
  sgd_step(m, zero, st, SgdConfig{0.1, 0.9, 0.0});
  EXPECT_EQ(m.weight(0, 0), 1.0);
  st.weight_velocity(0, 0) = 1.0;
  ProjectionModel other = m;
  sgd_step(other, zero, st, SgdConfig{0.0, 0.9, 0.0});
  EXPECT_DOUBLE_EQ(st.weight_velocity(0, 0), 0.9);
}

TEST(Sgd, MomentumSecondStep) {
  ProjectionModel m{Matrix::Zero(1, 1), Vector::Zero(1)};
  auto st = OptimizerState::zeros_like(m);
  Gradients g{0.0, Matrix::Constant(1, 1, 1.0), vec({1.0})};
  const SgdConfig cfg{0.1, 0.9, 0.0};
  sgd_step(m, g, st, cfg);
  const double before = m.weight(0, 0);
  sgd_step(m, g, st, cfg);
  EXPECT_NEAR(before - m.weight(0, 0), 0.19, 1e-15);
}

TEST(Sgd, ZeroLearningRateIsBitIdentical) {
  auto m = ProjectionModel::initialize(4, 3, 9);
  m.bias = vec({0.1, -0.2, 0.3});
  const auto before = m;
  auto st = OptimizerState::zeros_like(m);
  Gradients g{0.0, Matrix::Constant(3, 4, 0.7), vec({1.0, 2.0, 3.0})};
  sgd_step(m, g, st, SgdConfig{0.0, 0.9, 5e-4});
  EXPECT_EQ(m.weight, before.weight);
  EXPECT_EQ(m.bias, before.bias);
}

TEST(Sgd, ShapeMismatch) {
  auto m = ProjectionModel::initialize(4, 3, 9);
  auto st = OptimizerState::zeros_like(m);
  Gradients g{0.0, Matrix::Zero(2, 4), Vector::Zero(3)};
  try {
    sgd_step(m, g, st, SgdConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
  }
}

TEST(Sgd, FixedEpisodeLossDecreasesMonotonically) {
  const auto s = tiny(6);
  const Episode ep = sample_episode_at(s.data, s.split.base, EpisodeShape{3, 2, 3}, 6, 0);
  auto m = ProjectionModel::initialize(6, 6, 6);
  auto st = OptimizerState::zeros_like(m);
  double prev = INFINITY;
  for (int step = 0; step < 20; ++step) {
    const auto g = loss_and_gradients(m, ep, HeadConfig{}, s.hierarchy);
    EXPECT_LT(g.loss, prev) << "step " << step;
    prev = g.loss;
    sgd_step(m, g, st, SgdConfig{1e-4, 0.9, 5e-4});
  }
}

TEST(MetaTrain, ZeroEpochsReturnsInitialization) {
  const auto s = tiny(7);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.shape = EpisodeShape{3, 1, 2};
  cfg.seed = 4;
  const auto r = meta_train(s.data, s.split, s.hierarchy, cfg);
  const auto init = ProjectionModel::initialize(6, 6, 4);
  EXPECT_EQ(r.model.weight, init.weight);
  EXPECT_EQ(r.best.weight, init.weight);
  EXPECT_TRUE(r.curve.empty());
}

TEST(MetaTrain, DeterministicAndImproving) {
  SyntheticSpec spec;
  spec.dim = 8;
  spec.samples_per_leaf = 10;
  spec.seed = 8;
  const auto s = make_synthetic(spec);
  TrainConfig cfg = TrainConfig::defaults_for(Metric::hierarchical);
  cfg.head.metric = Metric::hierarchical;
  cfg.epochs = 5;
  cfg.episodes_per_epoch = 20;
  cfg.val_episodes = 20;
  cfg.shape = EpisodeShape{3, 2, 3};
  cfg.sgd.lr = 1e-2;
  cfg.seed = 8;
  const auto a = meta_train(s.data, s.split, s.hierarchy, cfg);
  ASSERT_EQ(a.curve.size(), 5u);
  EXPECT_LT(a.curve.back().mean_loss, a.curve.front().mean_loss);
  cfg.threads = 3;
  const auto b = meta_train(s.data, s.split, s.hierarchy, cfg);
  EXPECT_EQ(a.model.weight, b.model.weight);
  EXPECT_EQ(a.best.weight, b.best.weight);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].mean_loss, b.curve[i].mean_loss);
    EXPECT_EQ(a.curve[i].val_accuracy, b.curve[i].val_accuracy);
  }
}

TEST(TrainConfig, DefaultsAndValidation) {
  const auto hyp = TrainConfig::defaults_for(Metric::hyperbolic);
  EXPECT_EQ(hyp.sgd.lr, 1e-4);
  const auto euc = TrainConfig::defaults_for(Metric::euclidean);
  EXPECT_EQ(euc.sgd.lr, 1e-3);
  EXPECT_EQ(euc.sgd.momentum, 0.9);
  EXPECT_EQ(euc.sgd.weight_decay, 5e-4);
  EXPECT_EQ(euc.episodes_per_epoch, 500);
  EXPECT_EQ(euc.batch_episodes, 2);
  TrainConfig bad;
  bad.sgd.momentum = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = TrainConfig{};
  bad.sgd.lr = -1.0;
  EXPECT_THROW(bad.validate(), Error);
}
