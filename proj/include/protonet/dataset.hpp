#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "protonet/geometry.hpp"

namespace protonet {

class ClassHierarchy;

/// Labeled embedding vectors of uniform dimension; one column per record.
class EmbeddingSet {
 public:
  /// Validates unique ids, nonempty labels, finite values and matching sizes.
  EmbeddingSet(std::vector<std::string> ids, std::vector<std::string> labels, Matrix vectors);

  Eigen::Index dim() const noexcept { return vectors_.rows(); }
  std::size_t size() const noexcept { return ids_.size(); }

  const std::string& id(std::size_t row) const { return ids_.at(row); }
  const std::string& label(std::size_t row) const { return labels_.at(row); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const Matrix& vectors() const noexcept { return vectors_; }

  /// Distinct labels in sorted order.
  std::vector<std::string> classes() const;
  bool has_class(const std::string& label) const { return rows_.contains(label); }
  /// Row indices of `label` in file order; throws unknown-label.
  const std::vector<std::size_t>& rows_of(const std::string& label) const;

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> labels_;
  Matrix vectors_;
  std::map<std::string, std::vector<std::size_t>> rows_;
};

struct DatasetSplit {
  std::vector<std::string> base;
  std::vector<std::string> val;
  std::vector<std::string> novel;
};

/// Checks pairwise disjointness and that every label exists in `data` (and in
/// `hierarchy` as a leaf, when given).
void validate_split(const DatasetSplit& split, const EmbeddingSet& data, const ClassHierarchy* hierarchy);

/// Checks that every class in `data` is a leaf of `hierarchy`.
void validate_labels_against(const EmbeddingSet& data, const ClassHierarchy& hierarchy);

/// Embeddings stored column-wise with one label per column.
struct LabeledBatch {
  Matrix x;
  std::vector<std::string> labels;

  Eigen::Index size() const noexcept { return x.cols(); }
};

struct Episode {
  std::vector<std::string> classes;  // sorted
  LabeledBatch support;
  LabeledBatch query;
  std::vector<std::size_t> support_rows;  // rows in the source EmbeddingSet
  std::vector<std::size_t> query_rows;
  std::uint64_t index = 0;
};

}  // namespace protonet
