#include "protonet/episodes.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "protonet/error.hpp"
#include "protonet/hierarchy.hpp"

namespace protonet {

namespace {

void check_available(std::span<const std::string> classes, const EpisodeShape& shape) {
  if (classes.size() < static_cast<std::size_t>(shape.ways)) {
    throw Error(ErrorCode::insufficient_classes, "split has " + std::to_string(classes.size()) +
                                                     " classes, episode needs " + std::to_string(shape.ways));
  }
}

void check_class_size(const EmbeddingSet& data, const std::string& label, const EpisodeShape& shape) {
  const std::size_t need = static_cast<std::size_t>(shape.shots + shape.queries);
  const std::size_t have = data.rows_of(label).size();
  if (have < need) {
    throw Error(ErrorCode::insufficient_samples, "class '" + label + "' has " + std::to_string(have) +
                                                     " samples, episode needs " + std::to_string(need));
  }
}

}  // namespace

void EpisodeShape::validate() const {
  if (ways < 2) throw Error(ErrorCode::invalid_value, "k: must be >= 2, got " + std::to_string(ways));
  if (shots < 1) throw Error(ErrorCode::invalid_value, "n: must be >= 1, got " + std::to_string(shots));
  if (queries < 1) throw Error(ErrorCode::invalid_value, "n_query: must be >= 1, got " + std::to_string(queries));
}

Episode sample_episode(const EmbeddingSet& data, std::span<const std::string> classes, const EpisodeShape& shape,
                       Rng& rng, std::uint64_t index) {
  shape.validate();
  check_available(classes, shape);

  Episode ep;
  ep.index = index;
  for (std::size_t pick : rng.choose(classes.size(), static_cast<std::size_t>(shape.ways))) {
    ep.classes.push_back(classes[pick]);
  }
  std::sort(ep.classes.begin(), ep.classes.end());

  const auto n_support = static_cast<Eigen::Index>(shape.ways * shape.shots);
  const auto n_query = static_cast<Eigen::Index>(shape.ways * shape.queries);
  ep.support.x.resize(data.dim(), n_support);
  ep.query.x.resize(data.dim(), n_query);
  Eigen::Index s = 0;
  Eigen::Index q = 0;
  for (const auto& label : ep.classes) {
    check_class_size(data, label, shape);
    const auto& rows = data.rows_of(label);
    const auto picks = rng.choose(rows.size(), static_cast<std::size_t>(shape.shots + shape.queries));
    for (std::size_t i = 0; i < picks.size(); ++i) {
      const std::size_t row = rows[picks[i]];
      if (i < static_cast<std::size_t>(shape.shots)) {
        ep.support.x.col(s++) = data.vectors().col(static_cast<Eigen::Index>(row));
        ep.support.labels.push_back(label);
        ep.support_rows.push_back(row);
      } else {
        ep.query.x.col(q++) = data.vectors().col(static_cast<Eigen::Index>(row));
        ep.query.labels.push_back(label);
        ep.query_rows.push_back(row);
      }
    }
  }
  return ep;
}

Episode sample_episode_at(const EmbeddingSet& data, std::span<const std::string> classes, const EpisodeShape& shape,
                          std::uint64_t master_seed, std::uint64_t index) {
  Rng rng(derive_seed(master_seed, index));
  return sample_episode(data, classes, shape, rng, index);
}

double hierarchical_precision(const std::string& predicted, const std::string& truth, const ClassHierarchy& h) {
  if (!h.is_leaf(predicted)) throw Error(ErrorCode::unknown_label, "'" + predicted + "' is not a hierarchy leaf");
  if (!h.is_leaf(truth)) throw Error(ErrorCode::unknown_label, "'" + truth + "' is not a hierarchy leaf");
  int shared = 0;
  for (int l = 2; l <= h.height(); ++l) {
    if (h.ancestor_at_level(predicted, l) == h.ancestor_at_level(truth, l)) ++shared;
  }
  return static_cast<double>(shared) / static_cast<double>(h.height() - 1);
}

EpisodeResult evaluate_episode(const Episode& episode, const HeadConfig& cfg, const ClassHierarchy& h) {
  cfg.validate();
  const PrototypeSet prototypes = build_prototypes(episode.support, cfg, h);
  const LevelPrototypes& leaf = prototypes.leaf();
  const int height = h.height();

  EpisodeResult result;
  result.support_size = static_cast<std::size_t>(episode.support.size());
  result.query_size = static_cast<std::size_t>(episode.query.size());
  for (int l = 2; l <= height; ++l) {
    result.level_accuracy[l] = 0.0;
    result.level_accuracy_leaf_mapped[l] = 0.0;
  }

  const Eigen::Index n = episode.query.size();
  if (n == 0) throw Error(ErrorCode::empty_class, "episode has no queries");
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string& truth = episode.query.labels[static_cast<std::size_t>(i)];
    if (!std::binary_search(episode.classes.begin(), episode.classes.end(), truth)) {
      throw Error(ErrorCode::label_not_in_episode, "query label '" + truth + "' is not an episode class");
    }
    const Vector mapped = map_query(episode.query.x.col(i), cfg);
    const std::string& predicted = leaf.nodes[argmax(class_logits_mapped(mapped, leaf, cfg))];

    if (predicted == truth) result.accuracy += 1.0;
    result.hierarchical_precision += hierarchical_precision(predicted, truth, h);
    for (int l = 2; l <= height; ++l) {
      const std::string& true_node = h.ancestor_at_level(truth, l);
      const bool mapped_hit = h.ancestor_at_level(predicted, l) == true_node;
      if (mapped_hit) result.level_accuracy_leaf_mapped[l] += 1.0;
      bool native_hit = mapped_hit;
      if (cfg.metric == Metric::hierarchical && l < height) {
        const LevelPrototypes& level = prototypes.at(l);
        native_hit = level.nodes[argmax(class_logits_mapped(mapped, level, cfg))] == true_node;
      }
      if (native_hit) result.level_accuracy[l] += 1.0;
    }
  }

  const double count = static_cast<double>(n);
  result.accuracy /= count;
  result.hierarchical_precision /= count;
  for (auto& [l, v] : result.level_accuracy) v /= count;
  for (auto& [l, v] : result.level_accuracy_leaf_mapped) v /= count;
  return result;
}

Interval confidence_interval(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::empty_list, "confidence interval of an empty sample");
  const double m = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / m;
  // Identical values: exact mean, zero spread (summation rounding aside).
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    return {values.front(), 0.0};
  }
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / (m - 1.0));
  return {mean, 1.96 * s / std::sqrt(m)};
}

int default_thread_count() {
  const char* env = std::getenv("PROTONET_THREADS");
  if (env == nullptr) return 1;
  int value = 0;
  const char* end = env + std::char_traits<char>::length(env);
  auto [ptr, ec] = std::from_chars(env, end, value);
  if (ec != std::errc() || ptr != end || value < 1) return 1;
  return value;
}

EvalReport run_evaluation(const EmbeddingSet& data, std::span<const std::string> classes, const ClassHierarchy& h,
                          const HeadConfig& cfg, const EvalOptions& options) {
  cfg.validate();
  options.shape.validate();
  if (options.episodes < 1) {
    throw Error(ErrorCode::invalid_value, "episodes: must be >= 1, got " + std::to_string(options.episodes));
  }
  check_available(classes, options.shape);
  for (const auto& label : classes) {
    if (!h.is_leaf(label)) throw Error(ErrorCode::unknown_label, "'" + label + "' is not a hierarchy leaf");
    check_class_size(data, label, options.shape);
  }

  const auto m = static_cast<std::size_t>(options.episodes);
  std::vector<EpisodeResult> results(m);
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::size_t failed_index = m;
  std::exception_ptr failure;

  auto worker = [&] {
    for (std::size_t i = next++; i < m; i = next++) {
      try {
        const Episode ep = sample_episode_at(data, classes, options.shape, options.seed, i);
        results[i] = evaluate_episode(ep, cfg, h);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  const int threads = std::clamp(options.threads, 1, static_cast<int>(m));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const Error& e) {
      throw Error(e.code(), "episode " + std::to_string(failed_index) + ": " + e.message());
    }
  }

  EvalReport report;
  report.head = cfg;
  report.options = options;
  report.height = h.height();
  report.ci_degenerate = m == 1;

  auto percent = [&](auto&& pick) {
    std::vector<double> values(m);
    for (std::size_t i = 0; i < m; ++i) values[i] = 100.0 * pick(results[i]);
    return confidence_interval(values);
  };
  report.overall = percent([](const EpisodeResult& r) { return r.accuracy; });
  report.hierarchical_precision = percent([](const EpisodeResult& r) { return r.hierarchical_precision; });
  for (int l = 2; l <= h.height(); ++l) {
    report.level[l] = percent([l](const EpisodeResult& r) { return r.level_accuracy.at(l); });
    report.level_leaf_mapped[l] = percent([l](const EpisodeResult& r) { return r.level_accuracy_leaf_mapped.at(l); });
  }

  report.support_per_episode = results.front().support_size;
  report.queries_per_episode = results.front().query_size;
  for (const auto& r : results) {
    if (r.support_size != report.support_per_episode || r.query_size != report.queries_per_episode) {
      throw Error(ErrorCode::invalid_argument, "episode composition varied across episodes");
    }
  }
  return report;
}

}  // namespace protonet
