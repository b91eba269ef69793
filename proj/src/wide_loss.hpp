#pragma once

// Episode loss evaluated in 113-bit floating point, written independently of
// the heads module. The gradient checker differences it so that rounding in
// the loss stays far below the finite-difference step.

#include <vector>

#include "protonet/dataset.hpp"
#include "protonet/heads.hpp"

#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
#include <quadmath.h>
#endif

namespace protonet {

class ClassHierarchy;

namespace detail {

#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
using Wide = __float128;
#else
using Wide = long double;
#endif

class WideLoss {
 public:
  WideLoss(const Episode& episode, const HeadConfig& head, const ClassHierarchy& h);

  /// `weight` is out x in, column-major.
  Wide operator()(const std::vector<Wide>& weight, const std::vector<Wide>& bias) const;

 private:
  struct Level {
    double lambda = 1.0;
    std::size_t nodes = 0;
    std::vector<std::size_t> support_node;
    std::vector<std::size_t> query_node;
  };

  HeadConfig head_;
  std::vector<std::vector<Wide>> support_, query_;
  std::vector<Level> levels_;
};

}  // namespace detail
}  // namespace protonet
