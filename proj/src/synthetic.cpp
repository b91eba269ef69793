#include "protonet/synthetic.hpp"

#include <cstdio>

#include "protonet/error.hpp"
#include "protonet/rng.hpp"

namespace protonet {

namespace {

std::string padded(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%02d", prefix, i);
  return buf;
}

}  // namespace

SyntheticData make_synthetic(const SyntheticSpec& spec) {
  const int leaves = spec.super_classes * spec.leaves_per_super;
  if (spec.super_classes < 1 || spec.leaves_per_super < 1 || spec.samples_per_leaf < 1 || spec.dim < 1 ||
      spec.nuisance_dims < 0 || spec.nuisance_dims >= spec.dim || spec.novel_classes < 0 || spec.val_classes < 0 ||
      spec.novel_classes + spec.val_classes > leaves) {
    throw Error(ErrorCode::invalid_value, "inconsistent synthetic data spec");
  }
  Rng rng(derive_seed(spec.seed, 0x5EED));
  const Eigen::Index signal = spec.dim - spec.nuisance_dims;

  std::vector<Edge> edges;
  std::vector<std::string> ids, labels;
  Matrix vectors(spec.dim, static_cast<Eigen::Index>(leaves) * spec.samples_per_leaf);
  std::vector<std::vector<std::string>> by_super(static_cast<std::size_t>(spec.super_classes));

  Eigen::Index col = 0;
  for (int s = 0; s < spec.super_classes; ++s) {
    const std::string super = padded("s", s);
    edges.emplace_back("root", super);
    Vector super_mean = Vector::Zero(spec.dim);
    for (Eigen::Index i = 0; i < signal; ++i) super_mean[i] = spec.super_spread * rng.normal();

    for (int l = 0; l < spec.leaves_per_super; ++l) {
      const std::string leaf = super + padded("_l", l);
      edges.emplace_back(super, leaf);
      by_super[static_cast<std::size_t>(s)].push_back(leaf);
      Vector leaf_mean = super_mean;
      for (Eigen::Index i = 0; i < signal; ++i) leaf_mean[i] += spec.leaf_spread * rng.normal();

      for (int n = 0; n < spec.samples_per_leaf; ++n) {
        for (Eigen::Index i = 0; i < spec.dim; ++i) {
          const double scale = i < signal ? spec.noise : spec.nuisance_noise;
          vectors(i, col) = leaf_mean[i] + scale * rng.normal();
        }
        ids.push_back(leaf + padded("_n", n));
        labels.push_back(leaf);
        ++col;
      }
    }
  }

  DatasetSplit split;
  int dealt = 0;
  for (int l = 0; l < spec.leaves_per_super; ++l) {
    for (int s = 0; s < spec.super_classes; ++s, ++dealt) {
      const std::string& leaf = by_super[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)];
      if (dealt < spec.novel_classes) {
        split.novel.push_back(leaf);
      } else if (dealt < spec.novel_classes + spec.val_classes) {
        split.val.push_back(leaf);
      } else {
        split.base.push_back(leaf);
      }
    }
  }

  return SyntheticData{EmbeddingSet(std::move(ids), std::move(labels), std::move(vectors)),
                       ClassHierarchy::from_edges(edges), std::move(split)};
}

}  // namespace protonet
