#include "protonet/error.hpp"

namespace protonet {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_point: return "invalid-point";
    case ErrorCode::invalid_curvature: return "invalid-curvature";
    case ErrorCode::curvature_mismatch: return "curvature-mismatch";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::non_finite: return "non-finite-value";
    case ErrorCode::empty_list: return "empty-list";
    case ErrorCode::nonpositive_radius: return "nonpositive-r";
    case ErrorCode::coincident_points: return "coincident-points";
    case ErrorCode::empty_hierarchy: return "empty-hierarchy";
    case ErrorCode::multiple_roots: return "multiple-roots";
    case ErrorCode::cycle_detected: return "cycle-detected";
    case ErrorCode::unequal_leaf_depth: return "unequal-leaf-depth";
    case ErrorCode::duplicate_parent: return "duplicate-parent";
    case ErrorCode::unknown_class: return "unknown-class";
    case ErrorCode::level_out_of_range: return "level-out-of-range";
    case ErrorCode::invalid_gamma: return "invalid-gamma";
    case ErrorCode::invalid_height: return "invalid-height";
    case ErrorCode::empty_class: return "empty-class";
    case ErrorCode::unknown_label: return "unknown-label";
    case ErrorCode::empty_prototype_level: return "empty-prototype-level";
    case ErrorCode::label_not_in_episode: return "label-not-in-episode";
    case ErrorCode::gradient_singularity: return "gradient-singularity";
    case ErrorCode::insufficient_classes: return "insufficient-classes";
    case ErrorCode::insufficient_samples: return "insufficient-samples";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::duplicate_id: return "duplicate-id";
    case ErrorCode::overlap: return "overlap-error";
    case ErrorCode::unknown_key: return "unknown-key";
    case ErrorCode::invalid_value: return "invalid-value";
    case ErrorCode::invalid_argument: return "invalid-argument";
  }
  return "unknown-error";
}

ErrorCategory category_of(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_point:
    case ErrorCode::non_finite:
    case ErrorCode::coincident_points:
    case ErrorCode::gradient_singularity:
      return ErrorCategory::numeric;
    case ErrorCode::unknown_key:
    case ErrorCode::invalid_value:
    case ErrorCode::invalid_argument:
      return ErrorCategory::usage;
    default:
      return ErrorCategory::validation;
  }
}

std::string_view to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::validation: return "validation";
    case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace protonet
