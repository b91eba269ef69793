#include "protonet/dataset.hpp"

#include <set>

#include "protonet/error.hpp"
#include "protonet/hierarchy.hpp"

namespace protonet {

EmbeddingSet::EmbeddingSet(std::vector<std::string> ids, std::vector<std::string> labels, Matrix vectors)
    : ids_(std::move(ids)), labels_(std::move(labels)), vectors_(std::move(vectors)) {
  if (ids_.size() != labels_.size() || static_cast<Eigen::Index>(ids_.size()) != vectors_.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "ids, labels and vectors disagree on record count");
  }
  if (vectors_.rows() < 1) {
    throw Error(ErrorCode::dimension_mismatch, "embedding dimension must be >= 1");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) {
      throw Error(ErrorCode::duplicate_id, "id '" + ids_[i] + "' appears more than once");
    }
    if (labels_[i].empty()) {
      throw Error(ErrorCode::invalid_argument, "record '" + ids_[i] + "' has an empty label");
    }
    if (!vectors_.col(static_cast<Eigen::Index>(i)).allFinite()) {
      throw Error(ErrorCode::non_finite, "record '" + ids_[i] + "' has non-finite values");
    }
    rows_[labels_[i]].push_back(i);
  }
}

std::vector<std::string> EmbeddingSet::classes() const {
  std::vector<std::string> out;
  out.reserve(rows_.size());
  for (const auto& [label, rows] : rows_) out.push_back(label);
  return out;
}

const std::vector<std::size_t>& EmbeddingSet::rows_of(const std::string& label) const {
  auto it = rows_.find(label);
  if (it == rows_.end()) {
    throw Error(ErrorCode::unknown_label, "label '" + label + "' has no embeddings");
  }
  return it->second;
}

void validate_split(const DatasetSplit& split, const EmbeddingSet& data, const ClassHierarchy* hierarchy) {
  std::map<std::string, std::string> owner;
  const std::pair<const char*, const std::vector<std::string>*> parts[] = {
      {"base", &split.base}, {"val", &split.val}, {"novel", &split.novel}};
  for (const auto& [name, labels] : parts) {
    for (const auto& label : *labels) {
      auto [it, inserted] = owner.emplace(label, name);
      if (!inserted) {
        throw Error(ErrorCode::overlap, "label '" + label + "' appears in both '" + it->second + "' and '" +
                                            name + "'");
      }
      if (!data.has_class(label)) {
        throw Error(ErrorCode::unknown_label, "split '" + std::string(name) + "' names label '" + label +
                                                  "' which has no embeddings");
      }
      if (hierarchy != nullptr && !hierarchy->is_leaf(label)) {
        throw Error(ErrorCode::unknown_label, "split '" + std::string(name) + "' names label '" + label +
                                                  "' which is not a hierarchy leaf");
      }
    }
  }
}

void validate_labels_against(const EmbeddingSet& data, const ClassHierarchy& hierarchy) {
  for (const auto& label : data.classes()) {
    if (!hierarchy.is_leaf(label)) {
      throw Error(ErrorCode::unknown_label, "embedding label '" + label + "' is not a hierarchy leaf");
    }
  }
}

}  // namespace protonet
