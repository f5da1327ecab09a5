#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seqcrf/labels.hpp"
#include "seqcrf/potentials.hpp"

// Exact linear-chain inference. Everything runs in log space.
namespace seqcrf {

template <typename S>
struct ViterbiResult {
  std::vector<int> path;
  S score = 0;
};

template <typename S>
struct ChainInferenceResult {
  S log_partition = 0;
  std::vector<S> marginals;  // length x labels, rows sum to 1
  ViterbiResult<S> best;
};

// Allowed label transitions (a -> b) for constrained decoding, row-major L x L.
struct TransitionMask {
  std::size_t labels = 0;
  std::vector<std::uint8_t> allowed;

  bool permits(std::size_t a, std::size_t b) const { return allowed[a * labels + b] != 0; }
};

// Forbids O -> I-X and B-X/I-X -> I-Y for Y != X.
TransitionMask bio_transition_mask(const LabelSpace& labels);

// alpha[t][y]: log-sum of scores of all prefixes ending in y at t (unary at t included).
template <typename S>
std::vector<S> forward_scores(const PotentialTable<S>& pot);
// beta[t][y]: log-sum of scores of all suffixes after t given y at t.
template <typename S>
std::vector<S> backward_scores(const PotentialTable<S>& pot);

template <typename S>
S log_partition(const PotentialTable<S>& pot);

template <typename S>
std::vector<S> posterior_marginals(const PotentialTable<S>& pot);

// Ties resolve to the lowest label index at every step.
template <typename S>
ViterbiResult<S> viterbi_decode(const PotentialTable<S>& pot, const TransitionMask* mask = nullptr);

template <typename S>
S sequence_score(const PotentialTable<S>& pot, std::span<const int> labels);

// -(score(gold) - logZ)
template <typename S>
S sequence_nll(const PotentialTable<S>& pot, std::span<const int> gold);

// -sum_t log P(y_t = gold_t | x)
template <typename S>
S marginal_ce_loss(const PotentialTable<S>& pot, std::span<const int> gold);

template <typename S>
ChainInferenceResult<S> chain_inference(const PotentialTable<S>& pot);

inline constexpr std::size_t kBruteForceLimit = 1000000;

// Exhaustive enumeration of all L^T label sequences, accumulated in double.
// Rejects instances with L^T above kBruteForceLimit.
ChainInferenceResult<double> brute_force_oracle(const PotentialTable<double>& pot);

// ---- differentiable batched objectives -----------------------------------
//
// `gold` is [B, T] row-major with -1 at padding. Rows must hold at least one
// valid position. Results are summed over the batch.

template <typename S>
Var<S> chain_log_partition(const PotentialVars<S>& pot);  // [B]

template <typename S>
Var<S> chain_sequence_nll(const PotentialVars<S>& pot, std::span<const int> gold);

template <typename S>
Var<S> chain_marginal_ce(const PotentialVars<S>& pot, std::span<const int> gold);

// Log posterior marginals per position, T x [B, L].
template <typename S>
std::vector<Var<S>> chain_log_marginals(const PotentialVars<S>& pot);

}  // namespace seqcrf
