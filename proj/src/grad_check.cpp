#include "seqcrf/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seqcrf {

GradCheckReport grad_check(const ScalarFn& value, const GradientFn& gradient,
                           std::span<const double> point, double epsilon, double tolerance) {
  GradCheckReport report;
  const std::vector<double> analytic = gradient(point);
  if (analytic.size() != point.size()) {
    throw std::invalid_argument("grad_check: gradient has " + std::to_string(analytic.size()) +
                                " coordinates, point has " + std::to_string(point.size()));
  }
  std::vector<double> x(point.begin(), point.end());
  report.rel_errors.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double up = value(x);
    x[i] = saved - epsilon;
    const double down = value(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down) || !std::isfinite(analytic[i])) {
      report.nonfinite_index = i;
      report.passed = false;
      report.worst_index = i;
      report.max_rel_error = INFINITY;
      return report;
    }
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-3});
    const double err = std::abs(analytic[i] - numeric) / denom;
    report.rel_errors[i] = err;
    if (err > report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_index = i;
    }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

}  // namespace seqcrf
