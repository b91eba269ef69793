#include "protonet/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "protonet/error.hpp"

namespace protonet {

ClassHierarchy ClassHierarchy::from_edges(std::span<const Edge> edges) {
  if (edges.empty()) {
    throw Error(ErrorCode::empty_hierarchy, "hierarchy has no edges");
  }

  ClassHierarchy h;
  std::map<std::string, std::vector<std::string>> children;
  std::set<std::string> nodes;
  for (const auto& [parent, child] : edges) {
    if (parent.empty() || child.empty()) {
      throw Error(ErrorCode::invalid_argument, "hierarchy edge with empty label");
    }
    if (parent == child) {
      throw Error(ErrorCode::cycle_detected, "node '" + child + "' is its own parent");
    }
    auto [it, inserted] = h.parent_.emplace(child, parent);
    if (!inserted) {
      throw Error(ErrorCode::duplicate_parent,
                  "node '" + child + "' has parents '" + it->second + "' and '" + parent + "'");
    }
    children[parent].push_back(child);
    nodes.insert(parent);
    nodes.insert(child);
  }

  std::vector<std::string> roots;
  for (const auto& n : nodes) {
    if (!h.parent_.contains(n)) roots.push_back(n);
  }
  if (roots.empty()) {
    throw Error(ErrorCode::cycle_detected, "every node has a parent");
  }
  if (roots.size() > 1) {
    std::string list;
    for (const auto& r : roots) list += (list.empty() ? "" : ", ") + r;
    throw Error(ErrorCode::multiple_roots, "found roots " + list);
  }
  h.root_ = roots.front();

  std::deque<std::string> frontier{h.root_};
  h.level_[h.root_] = 1;
  while (!frontier.empty()) {
    const std::string node = frontier.front();
    frontier.pop_front();
    auto it = children.find(node);
    if (it == children.end()) continue;
    for (const auto& child : it->second) {
      h.level_[child] = h.level_[node] + 1;
      frontier.push_back(child);
    }
  }
  for (const auto& n : nodes) {
    if (!h.level_.contains(n)) {
      throw Error(ErrorCode::cycle_detected, "node '" + n + "' is not reachable from root '" + h.root_ + "'");
    }
  }

  for (const auto& n : nodes) {
    if (!children.contains(n)) h.leaves_.push_back(n);
  }
  h.height_ = h.level_.at(h.leaves_.front());
  for (const auto& leaf : h.leaves_) {
    const int depth = h.level_.at(leaf);
    if (depth != h.height_) {
      throw Error(ErrorCode::unequal_leaf_depth, "leaf '" + h.leaves_.front() + "' is at level " +
                                                     std::to_string(h.height_) + " but leaf '" + leaf +
                                                     "' is at level " + std::to_string(depth));
    }
  }

  for (const auto& leaf : h.leaves_) {
    std::vector<std::string> path(static_cast<std::size_t>(h.height_));
    std::string node = leaf;
    for (int l = h.height_; l >= 1; --l) {
      path[static_cast<std::size_t>(l - 1)] = node;
      if (l > 1) node = h.parent_.at(node);
    }
    h.paths_.emplace(leaf, std::move(path));
  }
  return h;
}

bool ClassHierarchy::is_leaf(const std::string& node) const { return paths_.contains(node); }

int ClassHierarchy::level_of(const std::string& node) const {
  auto it = level_.find(node);
  if (it == level_.end()) {
    throw Error(ErrorCode::unknown_class, "'" + node + "' is not in the hierarchy");
  }
  return it->second;
}

const std::string& ClassHierarchy::ancestor_at_level(const std::string& leaf, int level) const {
  auto it = paths_.find(leaf);
  if (it == paths_.end()) {
    throw Error(ErrorCode::unknown_class, "'" + leaf + "' is not a leaf of the hierarchy");
  }
  if (level < 1 || level > height_) {
    throw Error(ErrorCode::level_out_of_range,
                "level " + std::to_string(level) + " outside 1.." + std::to_string(height_));
  }
  return it->second[static_cast<std::size_t>(level - 1)];
}

std::vector<std::string> ClassHierarchy::nodes_at_level(int level) const {
  if (level < 1 || level > height_) {
    throw Error(ErrorCode::level_out_of_range,
                "level " + std::to_string(level) + " outside 1.." + std::to_string(height_));
  }
  std::vector<std::string> out;
  for (const auto& [node, l] : level_) {
    if (l == level) out.push_back(node);
  }
  return out;
}

std::vector<Edge> ClassHierarchy::edges() const {
  std::vector<Edge> out;
  out.reserve(parent_.size());
  for (const auto& [child, parent] : parent_) out.emplace_back(parent, child);
  std::sort(out.begin(), out.end());
  return out;
}

ClassHierarchy load_hierarchy(std::span<const Edge> edges) { return ClassHierarchy::from_edges(edges); }

LevelWeights level_weights(double gamma, int height) {
  if (!std::isfinite(gamma) || !(gamma > 0.0)) {
    throw Error(ErrorCode::invalid_gamma, "gamma must be finite and > 0, got " + std::to_string(gamma));
  }
  if (height < 2) {
    throw Error(ErrorCode::invalid_height, "level weights need height >= 2, got " + std::to_string(height));
  }
  // log-sum-exp over (l-1) * log(gamma) so large gamma^L cannot overflow
  const double log_gamma = std::log(gamma);
  double max_log = -INFINITY;
  for (int l = 2; l <= height; ++l) max_log = std::max(max_log, (l - 1) * log_gamma);
  double total = 0.0;
  LevelWeights out{gamma, height, {}};
  for (int l = 2; l <= height; ++l) {
    const double w = std::exp((l - 1) * log_gamma - max_log);
    out.weights[l] = w;
    total += w;
  }
  for (auto& [l, w] : out.weights) w /= total;
  return out;
}

ClassHierarchy parse_hierarchy(const std::string& text, const std::string& source_name) {
  std::vector<Edge> edges;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    const auto tab = line.find('\t');
    const auto where = source_name + ":" + std::to_string(line_no);
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw Error(ErrorCode::parse_error, where + ": expected 'parent<TAB>child', got '" + line + "'");
    }
    std::string parent = line.substr(0, tab);
    std::string child = line.substr(tab + 1);
    auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(' ');
      const auto e = s.find_last_not_of(' ');
      s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    trim(parent);
    trim(child);
    for (const auto* token : {&parent, &child}) {
      if (token->empty() || token->find_first_of(" \t\v\f") != std::string::npos) {
        throw Error(ErrorCode::parse_error, where + ": invalid label '" + *token + "'");
      }
    }
    edges.emplace_back(std::move(parent), std::move(child));
  }
  try {
    return ClassHierarchy::from_edges(edges);
  } catch (const Error& e) {
    throw Error(e.code(), source_name + ": " + e.message());
  }
}

ClassHierarchy read_hierarchy_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_error, "cannot open hierarchy file " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_hierarchy(buffer.str(), path.string());
}

std::string serialize_hierarchy(const ClassHierarchy& h) {
  std::string out;
  for (const auto& [parent, child] : h.edges()) out += parent + "\t" + child + "\n";
  return out;
}

}  // namespace protonet
