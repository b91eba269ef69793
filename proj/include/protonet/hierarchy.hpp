#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace protonet {

using Edge = std::pair<std::string, std::string>;  // (parent, child)

/// Rooted tree over class labels with every leaf at the same depth.
/// Level 1 is the root, level height() holds the leaves.
class ClassHierarchy {
 public:
  /// Validates the edge list: one root, no cycles, one parent per node and
  /// equal leaf depth.
  static ClassHierarchy from_edges(std::span<const Edge> edges);

  int height() const noexcept { return height_; }
  const std::string& root() const noexcept { return root_; }
  /// Sorted leaf labels.
  const std::vector<std::string>& leaves() const noexcept { return leaves_; }

  bool contains(const std::string& node) const { return level_.contains(node); }
  bool is_leaf(const std::string& node) const;
  /// Throws unknown-class for labels not in the tree.
  int level_of(const std::string& node) const;

  const std::string& ancestor_at_level(const std::string& leaf, int level) const;
  /// Sorted nodes at `level`.
  std::vector<std::string> nodes_at_level(int level) const;

  /// Edges sorted by (parent, child); from_edges(edges()) rebuilds the tree.
  std::vector<Edge> edges() const;

 private:
  ClassHierarchy() = default;

  std::string root_;
  int height_ = 0;
  std::map<std::string, std::string> parent_;
  std::map<std::string, int> level_;
  std::vector<std::string> leaves_;
  // root-to-leaf path for each leaf; path[l-1] is the level-l ancestor
  std::map<std::string, std::vector<std::string>> paths_;
};

/// Convex level weights lambda_l = gamma^(l-1) / sum_{l'=2..L} gamma^(l'-1).
struct LevelWeights {
  double gamma = 1.0;
  int height = 2;
  std::map<int, double> weights;  // levels 2..height

  double at(int level) const { return weights.at(level); }
};

ClassHierarchy load_hierarchy(std::span<const Edge> edges);
LevelWeights level_weights(double gamma, int height);

/// Tab-separated `parent<TAB>child` lines; `#` starts a comment.
ClassHierarchy read_hierarchy_file(const std::filesystem::path& path);
ClassHierarchy parse_hierarchy(const std::string& text, const std::string& source_name = "<memory>");
std::string serialize_hierarchy(const ClassHierarchy& h);

}  // namespace protonet
