#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace protonet {

enum class ErrorCode {
  // geometry
  invalid_point,
  invalid_curvature,
  curvature_mismatch,
  dimension_mismatch,
  non_finite,
  empty_list,
  nonpositive_radius,
  coincident_points,
  // hierarchy
  empty_hierarchy,
  multiple_roots,
  cycle_detected,
  unequal_leaf_depth,
  duplicate_parent,
  unknown_class,
  level_out_of_range,
  invalid_gamma,
  invalid_height,
  // heads
  empty_class,
  unknown_label,
  empty_prototype_level,
  label_not_in_episode,
  gradient_singularity,
  // episodes
  insufficient_classes,
  insufficient_samples,
  // io
  io_error,
  parse_error,
  duplicate_id,
  overlap,
  unknown_key,
  invalid_value,
  invalid_argument,
};

/// Coarse grouping used for CLI exit codes.
enum class ErrorCategory { usage = 1, validation = 2, numeric = 3 };

std::string_view to_string(ErrorCode code) noexcept;
ErrorCategory category_of(ErrorCode code) noexcept;
std::string_view to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }
  /// what() without the leading error-code tag.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace protonet
