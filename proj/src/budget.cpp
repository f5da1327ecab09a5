#include "seqcrf/budget.hpp"

#include <cmath>

namespace seqcrf {

namespace {

double ceiling(double target) { return (1.0 + kBudgetTolerance) * target; }

BudgetResolution describe(ModelKind kind, const ModelDims& dims, std::size_t labels, double target) {
  BudgetResolution r;
  r.dims = dims;
  r.count = parameter_count(kind, dims, labels);
  r.relative_deviation = (static_cast<double>(r.count) - target) / target;
  r.within_budget = std::abs(r.relative_deviation) <= kBudgetTolerance;
  return r;
}

}  // namespace

std::size_t fill_beta_width(ModelDims dims, std::size_t labels, double target) {
  std::size_t best = 1;
  for (std::size_t k = 1; k <= 4 * dims.hidden; ++k) {
    dims.beta_width = k;
    if (static_cast<double>(parameter_count(ModelKind::kSkipChain, dims, labels)) > ceiling(target)) break;
    best = k;
  }
  return best;
}

BudgetResolution resolve_hidden_size(ModelKind kind, std::size_t vocab, ModelDims base, std::size_t labels,
                                     double target) {
  base.vocab = vocab;
  if (kind == ModelKind::kSkipChain && base.beta_width == 0) {
    ModelDims smallest = base;
    smallest.hidden = kMinHidden;
    base.beta_width = fill_beta_width(smallest, labels, target);
  }
  for (std::size_t h = kMaxHidden; h >= kMinHidden; --h) {
    ModelDims d = base;
    d.hidden = h;
    if (static_cast<double>(parameter_count(kind, d, labels)) <= ceiling(target)) {
      return describe(kind, d, labels, target);
    }
  }
  ModelDims d = base;
  d.hidden = kMinHidden;
  BudgetResolution r = describe(kind, d, labels, target);
  r.warning = "no hidden size in [" + std::to_string(kMinHidden) + ", " + std::to_string(kMaxHidden) +
              "] keeps " + std::string(model_kind_name(kind)) + " under " +
              std::to_string(static_cast<long long>(ceiling(target))) + " parameters; using " +
              std::to_string(kMinHidden) + " (" + std::to_string(r.count) + ")";
  return r;
}

}  // namespace seqcrf
