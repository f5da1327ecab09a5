#pragma once

#include <cstddef>
#include <string>

#include "seqcrf/model.hpp"

namespace seqcrf {

inline constexpr double kParameterBudget = 3.55e6;
inline constexpr double kBudgetTolerance = 0.02;
inline constexpr std::size_t kMinHidden = 200;
inline constexpr std::size_t kMaxHidden = 250;
// Vocabulary size assumed when no corpus is at hand (budget reports, tests).
inline constexpr std::size_t kReferenceVocab = 13300;

struct BudgetResolution {
  ModelDims dims;
  std::size_t count = 0;
  double relative_deviation = 0.0;  // (count - target) / target
  bool within_budget = false;       // |deviation| <= tolerance
  std::string warning;              // set when no size in range satisfies the ceiling
};

// Largest skip-chain message width whose total count stays under the ceiling
// at dims.hidden (at least 1).
std::size_t fill_beta_width(ModelDims dims, std::size_t labels, double target = kParameterBudget);

// Largest hidden size in [200, 250] whose closed-form count is at most
// (1 + tolerance) * target. Unary and pairwise widths follow the hidden size
// unless set in `base`. For the skip-chain model an unset message width is
// fixed first by filling the budget at the smallest hidden size. Falls back to
// the smallest size with a warning when nothing fits.
BudgetResolution resolve_hidden_size(ModelKind kind, std::size_t vocab, ModelDims base = {},
                                     std::size_t labels = 19, double target = kParameterBudget);

}  // namespace seqcrf
