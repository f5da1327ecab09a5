#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace seqcrf {

struct GradCheckReport {
  bool passed = false;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> rel_errors;
  // First coordinate whose perturbed evaluation was not finite.
  std::optional<std::size_t> nonfinite_index;
};

using ScalarFn = std::function<double(std::span<const double>)>;
using GradientFn = std::function<std::vector<double>(std::span<const double>)>;

// Compares `gradient(point)` with central differences of `value`.
// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-3); the floor
// keeps near-zero coordinates from being judged on round-off alone.
GradCheckReport grad_check(const ScalarFn& value, const GradientFn& gradient,
                           std::span<const double> point, double epsilon = 1e-5,
                           double tolerance = 1e-4);

}  // namespace seqcrf
