#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "protonet/dataset.hpp"
#include "protonet/episodes.hpp"
#include "protonet/heads.hpp"
#include "protonet/trainer.hpp"

namespace protonet {

using Json = nlohmann::ordered_json;

// ---- embeddings: CSV with header id,label,e0,...,e{d-1} ----

EmbeddingSet load_embeddings(const std::filesystem::path& path);
EmbeddingSet parse_embeddings(const std::string& text, const std::string& source_name = "<memory>");
/// Values written with 17 significant digits, so parsing restores them exactly.
std::string format_embeddings(const EmbeddingSet& data);
void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& data);

// ---- splits: JSON object {"base": [...], "val": [...], "novel": [...]} ----

DatasetSplit load_splits(const std::filesystem::path& path);
DatasetSplit parse_splits(const std::string& text, const std::string& source_name = "<memory>");
Json splits_to_json(const DatasetSplit& split);

// ---- run configuration ----

struct RunConfig {
  std::string mode = "eval";  // eval | train | gradcheck | selftest
  std::string embeddings;
  std::string hierarchy;
  std::string splits;
  std::string model;  // optional projection checkpoint for eval
  HeadConfig head;
  EpisodeShape shape;
  int episodes = 1000;
  std::uint64_t seed = 0;
  // training
  std::optional<double> lr;  // unset: 1e-3, or 1e-4 for the hyperbolic head
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int epochs = 400;
  int episodes_per_epoch = 500;
  int batch_episodes = 2;
  int val_episodes = 500;
  int out_dim = 0;
  // gradcheck
  double fd_step = 1e-6;
  /// Not echoed into reports: it never changes results.
  int threads = 1;

  double resolved_lr() const;
  TrainConfig train_config() const;
  EvalOptions eval_options() const;
  void validate() const;
};

/// Resolves defaults < file < overrides. `overrides` is a JSON object using
/// the same keys as the file. Unknown keys raise unknown-key; bad values
/// raise invalid-value naming the key.
RunConfig load_config(const std::optional<std::filesystem::path>& path, const Json& overrides);
RunConfig config_from_json(const Json& merged, const std::string& source_name);
/// Fully resolved configuration in the config-file schema (threads omitted).
Json config_to_json(const RunConfig& cfg);

// ---- reports ----

/// Serializes with stable key order, two-space indent and floats printed with
/// 17 significant digits.
std::string dump_json(const Json& value);

std::string format_interval(const Interval& interval);
Json eval_report_to_json(const EvalReport& report, const RunConfig& cfg);
Json gradcheck_report_to_json(const GradCheckReport& report, const RunConfig& cfg, std::uint64_t episode_index);
Json train_report_to_json(const TrainResult& result, const RunConfig& cfg, const EvalReport& novel_initial,
                          const EvalReport& novel_best);

// ---- checkpoints ----

struct Checkpoint {
  ProjectionModel model;
  OptimizerState state;
  std::string config_hash;  // 16 hex digits of FNV-1a over the echoed config
};

std::string config_hash(const RunConfig& cfg);
Json checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const Json& doc, const std::string& source_name = "<memory>");
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path, const char* what);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace protonet
