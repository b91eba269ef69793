#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "protonet/episodes.hpp"
#include "protonet/error.hpp"
#include "protonet/hierarchy.hpp"
#include "protonet/synthetic.hpp"
#include "support.hpp"

using namespace protonet;

namespace {

SyntheticData small_data(std::uint64_t seed = 0, int samples = 20) {
  SyntheticSpec spec;
  spec.dim = 8;
  spec.samples_per_leaf = samples;
  spec.seed = seed;
  return make_synthetic(spec);
}

std::vector<std::string> all_leaves(const SyntheticData& s) { return s.hierarchy.leaves(); }

}  // namespace

TEST(SampleEpisode, CompositionAndDisjointness) {
  const auto s = small_data();
  const auto classes = all_leaves(s);
  Rng rng(1);
  for (int ways = 2; ways <= 6; ++ways) {
    for (int shots = 1; shots <= 5; shots += 2) {
      for (int queries = 1; queries <= 15; queries += 7) {
        const EpisodeShape shape{ways, shots, queries};
        const Episode ep = sample_episode(s.data, classes, shape, rng);
        ASSERT_EQ(ep.classes.size(), static_cast<std::size_t>(ways));
        ASSERT_TRUE(std::is_sorted(ep.classes.begin(), ep.classes.end()));
        ASSERT_EQ(ep.support.size(), ways * shots);
        ASSERT_EQ(ep.query.size(), ways * queries);
        std::set<std::size_t> rows(ep.support_rows.begin(), ep.support_rows.end());
        for (auto r : ep.query_rows) ASSERT_TRUE(rows.insert(r).second) << "row reused";
        for (const auto& c : ep.classes) {
          ASSERT_EQ(std::count(ep.support.labels.begin(), ep.support.labels.end(), c), shots);
          ASSERT_EQ(std::count(ep.query.labels.begin(), ep.query.labels.end(), c), queries);
        }
        for (std::size_t i = 0; i < ep.query_rows.size(); ++i) {
          ASSERT_EQ(s.data.label(ep.query_rows[i]), ep.query.labels[i]);
          ASSERT_EQ(Vector(s.data.vectors().col(static_cast<Eigen::Index>(ep.query_rows[i]))),
                    Vector(ep.query.x.col(static_cast<Eigen::Index>(i))));
        }
      }
    }
  }
}

TEST(SampleEpisode, OneShotProtocolShape) {
  const auto s = small_data();
  const Episode ep = sample_episode_at(s.data, all_leaves(s), EpisodeShape{5, 1, 15}, 0, 0);
  EXPECT_EQ(ep.support.size(), 5);
  EXPECT_EQ(ep.query.size(), 75);
}

TEST(SampleEpisode, DeterministicForSeed) {
  const auto s = small_data();
  const auto classes = all_leaves(s);
  const Episode a = sample_episode_at(s.data, classes, EpisodeShape{}, 42, 7);
  const Episode b = sample_episode_at(s.data, classes, EpisodeShape{}, 42, 7);
  EXPECT_EQ(a.support_rows, b.support_rows);
  EXPECT_EQ(a.query_rows, b.query_rows);
  const Episode c = sample_episode_at(s.data, classes, EpisodeShape{}, 42, 8);
  EXPECT_NE(a.support_rows, c.support_rows);
}

TEST(SampleEpisode, SampleCountBoundary) {
  const auto s = small_data(0, 20);
  const auto classes = all_leaves(s);
  EXPECT_NO_THROW(sample_episode_at(s.data, classes, EpisodeShape{5, 5, 15}, 0, 0));
  try {
    sample_episode_at(s.data, classes, EpisodeShape{5, 6, 15}, 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_samples);
    EXPECT_NE(std::string(e.what()).find("class '"), std::string::npos);
  }
}

TEST(SampleEpisode, InsufficientClasses) {
  const auto s = small_data();
  const std::vector<std::string> two{"s00_l00", "s01_l00"};
  try {
    sample_episode_at(s.data, two, EpisodeShape{3, 1, 1}, 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_classes);
  }
}

TEST(SampleEpisode, ClassesUniformAcrossEpisodes) {
  const auto s = small_data();
  const auto classes = all_leaves(s);
  std::map<std::string, int> hits;
  const int episodes = 3000;
  for (int i = 0; i < episodes; ++i) {
    for (const auto& c : sample_episode_at(s.data, classes, EpisodeShape{3, 1, 1}, 9, i).classes) ++hits[c];
  }
  const double expected = episodes * 3.0 / static_cast<double>(classes.size());
  for (const auto& c : classes) EXPECT_NEAR(hits[c], expected, 5.0 * std::sqrt(expected)) << c;
}

TEST(HierarchicalPrecision, Cases) {
  const auto h = testing_support::tree_2x3();
  EXPECT_EQ(hierarchical_precision("a1", "a1", h), 1.0);
  EXPECT_EQ(hierarchical_precision("a1", "a2", h), 0.5);
  EXPECT_EQ(hierarchical_precision("a1", "b2", h), 0.0);
  try {
    hierarchical_precision("a1", "zz", h);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unknown_label);
  }
}

TEST(ConfidenceInterval, Cases) {
  const std::vector<double> same(10, 0.7);
  EXPECT_EQ(confidence_interval(same).half_width, 0.0);
  EXPECT_NEAR(confidence_interval(same).mean, 0.7, 1e-15);
  const std::vector<double> one{0.3};
  EXPECT_EQ(confidence_interval(one).half_width, 0.0);
  std::vector<double> half;
  for (int i = 0; i < 500; ++i) {
    half.push_back(0.0);
    half.push_back(1.0);
  }
  const auto ci = confidence_interval(half);
  EXPECT_EQ(ci.mean, 0.5);
  const double s = std::sqrt(250.0 / 999.0);
  EXPECT_NEAR(ci.half_width, 1.96 * s / std::sqrt(1000.0), 1e-15);
  EXPECT_NEAR(ci.half_width, 0.0310, 5e-5);
  try {
    confidence_interval(std::span<const double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_list);
  }
}

TEST(EvaluateEpisode, PerfectPredictions) {
  const auto s = small_data();
  const Episode ep = sample_episode_at(s.data, all_leaves(s), EpisodeShape{}, 3, 0);
  const auto r = evaluate_episode(ep, HeadConfig{}, s.hierarchy);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.hierarchical_precision, 1.0);
  EXPECT_EQ(r.level_accuracy.at(2), 1.0);
  EXPECT_EQ(r.query_size, 75u);
  EXPECT_EQ(r.support_size, 25u);
}

TEST(EvaluateEpisode, ChanceLevelOnIndistinguishableClasses) {
  // Every class draws from the same distribution: accuracy is 1/K in expectation.
  const int classes = 8, per = 30, dim = 4;
  Rng rng(5);
  std::vector<std::string> ids, labels;
  Matrix x(dim, classes * per);
  std::vector<Edge> edges;
  for (int c = 0; c < classes; ++c) {
    const std::string name = "c" + std::to_string(c);
    edges.emplace_back("root", name);
    for (int i = 0; i < per; ++i) {
      ids.push_back(name + "_" + std::to_string(i));
      labels.push_back(name);
      x.col(c * per + i) = testing_support::gaussian(rng, dim);
    }
  }
  const EmbeddingSet data(ids, labels, x);
  const auto h = ClassHierarchy::from_edges(edges);
  EvalOptions opt;
  opt.episodes = 1000;
  const auto report = run_evaluation(data, h.leaves(), h, HeadConfig{}, opt);
  EXPECT_NEAR(report.overall.mean, 20.0, 3.0);
}

TEST(EvaluateEpisode, HierarchicalLevelAccuracyMatchesEnumeration) {
  const auto s = small_data(4);
  HeadConfig cfg;
  cfg.metric = Metric::hierarchical;
  for (int i = 0; i < 40; ++i) {
    const Episode ep = sample_episode_at(s.data, all_leaves(s), EpisodeShape{5, 2, 3}, 11, i);
    const auto r = evaluate_episode(ep, cfg, s.hierarchy);
    for (int level = 2; level <= 3; ++level) {
      // Brute force: pooled means per node, nearest wins, ties to the lowest label.
      std::map<std::string, std::pair<Vector, int>> sums;
      for (Eigen::Index j = 0; j < ep.support.size(); ++j) {
        const auto& node = s.hierarchy.ancestor_at_level(ep.support.labels[static_cast<std::size_t>(j)], level);
        auto& [sum, n] = sums.try_emplace(node, Vector::Zero(s.data.dim()), 0).first->second;
        sum += ep.support.x.col(j);
        ++n;
      }
      int correct = 0;
      for (Eigen::Index j = 0; j < ep.query.size(); ++j) {
        std::string best;
        double best_d = INFINITY;
        for (const auto& [node, sn] : sums) {
          const double d = (ep.query.x.col(j) - sn.first / sn.second).norm();
          if (d < best_d) {
            best_d = d;
            best = node;
          }
        }
        correct += best == s.hierarchy.ancestor_at_level(ep.query.labels[static_cast<std::size_t>(j)], level);
      }
      EXPECT_NEAR(r.level_accuracy.at(level), correct / static_cast<double>(ep.query.size()), 1e-15);
    }
  }
}

TEST(EvaluateEpisode, FlatHeadLevelAccuracyIsLeafMapped) {
  const auto s = small_data(6);
  const Episode ep = sample_episode_at(s.data, all_leaves(s), EpisodeShape{5, 1, 5}, 1, 0);
  const auto r = evaluate_episode(ep, HeadConfig{}, s.hierarchy);
  EXPECT_EQ(r.level_accuracy, r.level_accuracy_leaf_mapped);
  EXPECT_EQ(r.level_accuracy.at(3), r.accuracy);
}

TEST(RunEvaluation, DeterministicAcrossThreads) {
  const auto s = small_data(2);
  for (Metric m : {Metric::euclidean, Metric::cosine, Metric::hierarchical, Metric::hyperbolic}) {
    HeadConfig cfg;
    cfg.metric = m;
    EvalOptions opt;
    opt.episodes = 200;
    opt.seed = 17;
    opt.shape = EpisodeShape{5, 1, 4};
    opt.threads = 1;
    const auto a = run_evaluation(s.data, all_leaves(s), s.hierarchy, cfg, opt);
    opt.threads = 7;
    const auto b = run_evaluation(s.data, all_leaves(s), s.hierarchy, cfg, opt);
    EXPECT_EQ(a.overall.mean, b.overall.mean);
    EXPECT_EQ(a.overall.half_width, b.overall.half_width);
    EXPECT_EQ(a.hierarchical_precision.mean, b.hierarchical_precision.mean);
    EXPECT_EQ(a.level.at(2).mean, b.level.at(2).mean);
    EXPECT_GE(a.overall.mean, 0.0);
    EXPECT_LE(a.overall.mean, 100.0);
    EXPECT_GE(a.overall.half_width, 0.0);
    EXPECT_EQ(a.queries_per_episode, 20u);
  }
}

TEST(RunEvaluation, SingleEpisodeFlagsDegenerateCi) {
  const auto s = small_data();
  EvalOptions opt;
  opt.episodes = 1;
  const auto r = run_evaluation(s.data, all_leaves(s), s.hierarchy, HeadConfig{}, opt);
  EXPECT_TRUE(r.ci_degenerate);
  EXPECT_EQ(r.overall.half_width, 0.0);
}

TEST(RunEvaluation, RejectsBadInputs) {
  const auto s = small_data(0, 10);
  EvalOptions opt;
  opt.episodes = 5;
  EXPECT_THROW(run_evaluation(s.data, all_leaves(s), s.hierarchy, HeadConfig{}, opt), Error);
  opt.shape = EpisodeShape{5, 1, 1};
  opt.episodes = 0;
  EXPECT_THROW(run_evaluation(s.data, all_leaves(s), s.hierarchy, HeadConfig{}, opt), Error);
}

TEST(Rng, ChooseIsDistinctAndBelowInRange) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto picks = rng.choose(20, 7);
    std::set<std::size_t> uniq(picks.begin(), picks.end());
    EXPECT_EQ(uniq.size(), 7u);
    EXPECT_LT(*uniq.rbegin(), 20u);
    EXPECT_LT(rng.below(3), 3u);
  }
  EXPECT_NE(derive_seed(0, 0), derive_seed(0, 1));
  EXPECT_NE(derive_seed(0, 1), derive_seed(1, 0));
}
