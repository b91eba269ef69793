#pragma once

#include <cstdint>
#include <vector>

#include "protonet/dataset.hpp"
#include "protonet/episodes.hpp"
#include "protonet/heads.hpp"

namespace protonet {

class ClassHierarchy;

/// Linear feature map x -> Wx + b standing in for the trainable extractor.
struct ProjectionModel {
  Matrix weight;  // out_dim x in_dim
  Vector bias;    // out_dim

  Eigen::Index in_dim() const noexcept { return weight.cols(); }
  Eigen::Index out_dim() const noexcept { return weight.rows(); }

  /// Weights uniform in +-sqrt(6 / (in + out)), zero bias.
  static ProjectionModel initialize(Eigen::Index in_dim, Eigen::Index out_dim, std::uint64_t seed);
  static ProjectionModel identity(Eigen::Index dim);
};

Vector forward_project(const ProjectionModel& model, const Vector& x);
/// Column-wise projection.
Matrix forward_project(const ProjectionModel& model, const Matrix& x);
EmbeddingSet project(const ProjectionModel& model, const EmbeddingSet& data);
Episode project(const ProjectionModel& model, const Episode& episode);

struct Gradients {
  double loss = 0.0;
  Matrix weight;
  Vector bias;
};

/// Episode loss on projected embeddings and its exact gradient with respect
/// to (W, b). `h` is consulted by the hierarchical head only.
Gradients loss_and_gradients(const ProjectionModel& model, const Episode& episode, const HeadConfig& head,
                             const ClassHierarchy& h);

struct OptimizerState {
  Matrix weight_velocity;
  Vector bias_velocity;

  static OptimizerState zeros_like(const ProjectionModel& model);
};

struct SgdConfig {
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v.
void sgd_step(ProjectionModel& model, const Gradients& grads, OptimizerState& state, const SgdConfig& cfg);

struct TrainConfig {
  SgdConfig sgd;
  int epochs = 400;
  int episodes_per_epoch = 500;
  int batch_episodes = 2;
  int val_episodes = 500;
  EpisodeShape shape;
  HeadConfig head;
  Eigen::Index out_dim = 0;  // 0 keeps the input dimension
  std::uint64_t seed = 0;
  int threads = 1;

  /// Defaults with the learning rate lowered to 1e-4 for the hyperbolic head.
  static TrainConfig defaults_for(Metric metric);
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double val_accuracy = 0.0;  // percent
};

struct TrainResult {
  ProjectionModel model;  // after the last epoch
  OptimizerState state;
  ProjectionModel best;   // highest validation accuracy; the initial model when epochs == 0
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<EpochRecord> curve;
};

/// Episodic SGD over base classes with per-epoch validation on val classes.
TrainResult meta_train(const EmbeddingSet& data, const DatasetSplit& split, const ClassHierarchy& h,
                       const TrainConfig& cfg);

struct GradCheckReport {
  double max_rel_error_weight = 0.0;
  double max_rel_error_bias = 0.0;
  double max_rel_error = 0.0;
  /// |wide-precision reference loss - analytic loss| at the unperturbed model.
  double reference_loss_gap = 0.0;
  double threshold = 0.0;
  double step = 0.0;
  std::size_t parameters = 0;
  bool passed = false;
};

/// Central-difference check of loss_and_gradients. The differenced loss is an
/// independent 113-bit evaluation, so the step's rounding noise stays below
/// the 1e-8 floor of the relative error |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport finite_difference_check(const ProjectionModel& model, const Episode& episode,
                                        const HeadConfig& head, const ClassHierarchy& h, double step,
                                        double threshold);

/// 1e-5 for the Euclidean and cosine heads, 1e-4 otherwise.
double default_gradcheck_threshold(Metric metric);

}  // namespace protonet
