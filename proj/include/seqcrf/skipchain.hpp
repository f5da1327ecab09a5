#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "seqcrf/layers.hpp"
#include "seqcrf/potentials.hpp"

// Approximate skip-chain inference: each label variable receives one grouped
// message from the factors on its left and one from the factors on its right,
// and its marginal is normalised independently of every other position.
namespace seqcrf {

template <typename S>
struct MessageTable {
  std::size_t length = 0;
  std::size_t labels = 0;
  std::vector<S> left;           // length x labels
  std::vector<S> right;          // length x labels
  std::vector<S> log_partition;  // per position; filled by skip_marginals
  std::size_t skip_range = 0;    // reference mode only
};

// Pair scores between arbitrary positions: at(t, i, a, b) scores y_t = a
// together with y_i = b. Entries are filled for |t - i| <= reach.
template <typename S>
struct SkipPairTable {
  std::size_t length = 0;
  std::size_t labels = 0;
  std::size_t reach = 0;
  std::vector<S> scores;  // length x length x labels x labels

  S at(std::size_t t, std::size_t i, std::size_t a, std::size_t b) const {
    return scores[((t * length + i) * labels + a) * labels + b];
  }
  S& at(std::size_t t, std::size_t i, std::size_t a, std::size_t b) {
    return scores[((t * length + i) * labels + a) * labels + b];
  }

  SkipPairTable() = default;
  SkipPairTable(std::size_t length, std::size_t labels, std::size_t reach);
  // Adjacent pairs of a chain table (reach 1), mirrored for both orientations.
  static SkipPairTable from_chain(const PotentialTable<S>& chain);
};

// One message-passing iteration with skip edges to the m nearest neighbours
// on each side (window truncated at the sentence boundary):
//   left(y_t)  = sum_{i=t-m}^{t-1} logsumexp_{y_i} [psi(y_t, y_i) + phi(y_i)]
//   right(y_t) = sum_{i=t+1}^{t+m} logsumexp_{y_i} [psi(y_t, y_i) + phi(y_i)]
template <typename S>
MessageTable<S> beta_reference(std::span<const S> unary, const SkipPairTable<S>& pairs, std::size_t m);

// log p(y_t) = right + left + phi - log Z_t. Fills msgs.log_partition and
// returns the normalised marginals (length x labels).
template <typename S>
std::vector<S> skip_marginals(std::span<const S> unary, MessageTable<S>& msgs);

// -sum_t log marginal(t, gold_t)
template <typename S>
S skipchain_loss(std::span<const S> marginals, std::size_t labels, std::span<const int> gold);

// Same loss written from the message table: -sum_t [right + left + phi - log Z_t] at gold.
template <typename S>
S skipchain_loss(std::span<const S> unary, const MessageTable<S>& msgs, std::span<const int> gold);

// ---- recurrent message estimator ------------------------------------------

template <typename S>
struct BetaEstimatorVars {
  LstmVars<S> left;
  LstmVars<S> right;
  DenseVars<S> left_proj;
  DenseVars<S> right_proj;
};

// Two LSTMs over the per-position potential features [phi(t) ; psi(t, t+1)]:
// one read left-to-right for the left messages, one right-to-left for the
// right messages, each projected to L scores.
template <typename S>
struct BetaEstimator {
  LstmParams<S> left;
  LstmParams<S> right;
  DenseParams<S> left_proj;
  DenseParams<S> right_proj;

  BetaEstimator() = default;
  BetaEstimator(std::size_t labels, std::size_t width);
  void init(std::mt19937_64& rng);
  std::vector<Parameter<S>*> parameters();
  BetaEstimatorVars<S> bind(Tape<S>& tape);
  static std::size_t input_dim(std::size_t labels) { return labels + labels * labels; }
  static std::size_t count(std::size_t labels, std::size_t width);
};

template <typename S>
struct MessageVars {
  std::vector<Var<S>> left;   // T x [B, L]
  std::vector<Var<S>> right;  // T x [B, L]
};

// left(t) reads only positions before t, right(t) only positions after t.
// Both are zero at padding, at the first (left) and last (right) positions.
template <typename S>
MessageVars<S> beta_recurrent(const PotentialVars<S>& pot, const BetaEstimatorVars<S>& est);

// T x [B, L] log marginals.
template <typename S>
std::vector<Var<S>> skip_log_marginals(const PotentialVars<S>& pot, const MessageVars<S>& msgs);

// Batch sum of -log marginal at gold labels; gold is [B, T] with -1 at padding.
template <typename S>
Var<S> skipchain_batch_loss(const std::vector<Var<S>>& log_marginals, std::span<const int> gold,
                            const Array<S>& mask);

// Messages of batch row b restricted to its valid positions.
template <typename S>
MessageTable<S> message_table(const MessageVars<S>& msgs, const Array<S>& mask, std::size_t b);

}  // namespace seqcrf
