#pragma once

#include <cstdint>

#include "protonet/dataset.hpp"
#include "protonet/hierarchy.hpp"

namespace protonet {

/// Three-level Gaussian cluster data: super-class means drawn with spread
/// `super_spread`, leaf means offset from them by `leaf_spread`, samples with
/// isotropic noise. The last `nuisance_dims` coordinates carry only noise of
/// scale `nuisance_noise`, which a learned projection can suppress.
struct SyntheticSpec {
  int super_classes = 4;
  int leaves_per_super = 3;
  int samples_per_leaf = 40;
  int dim = 32;
  double super_spread = 3.0;
  double leaf_spread = 1.0;
  double noise = 0.3;
  int nuisance_dims = 0;
  double nuisance_noise = 0.0;
  // Leaves are dealt to splits round-robin over super-classes: novel first,
  // then val, the rest to base.
  int novel_classes = 6;
  int val_classes = 3;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  EmbeddingSet data;
  ClassHierarchy hierarchy;
  DatasetSplit split;
};

SyntheticData make_synthetic(const SyntheticSpec& spec);

}  // namespace protonet
