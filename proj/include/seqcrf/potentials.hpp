#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "seqcrf/labels.hpp"
#include "seqcrf/layers.hpp"

namespace seqcrf {

// Potentials of one sentence. Pairwise scores are either one shared [L x L]
// transition matrix or one [L x L] table per adjacent pair (t, t+1); entry
// (a, b) scores label a at t followed by label b at t+1.
template <typename S>
struct PotentialTable {
  std::size_t length = 0;
  std::size_t labels = 0;
  std::vector<S> unary;     // length x labels
  std::vector<S> pairwise;  // labels^2 (shared) or (length-1) x labels^2
  bool shared = true;

  S unary_at(std::size_t t, std::size_t y) const { return unary[t * labels + y]; }
  S pair_at(std::size_t t, std::size_t a, std::size_t b) const {
    return shared ? pairwise[a * labels + b] : pairwise[(t * labels + a) * labels + b];
  }
  // Throws std::invalid_argument on empty sentences, size mismatches, or
  // non-finite entries.
  void validate() const;

  static PotentialTable zeros(std::size_t length, std::size_t labels, bool shared);
};

// Batched potentials on a tape, aligned with a [B, T] pre-padded mask.
template <typename S>
struct PotentialVars {
  std::size_t labels = 0;
  Array<S> mask;                     // [B, T]
  std::vector<Var<S>> unary;         // T x [B, L], zero rows at padding
  std::vector<Var<S>> pairwise;      // T-1 x [B, L, L]; empty when `transition` is set
  std::optional<Var<S>> transition;  // shared [L, L]

  // Potential values of row b restricted to its valid positions.
  PotentialTable<S> sentence(std::size_t b) const;
};

// phi_nn: a tanh hidden layer followed by an affine projection to L scores.
template <typename S>
struct UnaryHead {
  DenseParams<S> hidden;
  DenseParams<S> output;

  UnaryHead() = default;
  UnaryHead(std::size_t feature_dim, std::size_t width, std::size_t labels);
  void init(std::mt19937_64& rng);
  std::vector<Parameter<S>*> parameters();
  static std::size_t count(std::size_t feature_dim, std::size_t width, std::size_t labels);
};

template <typename S>
struct UnaryVars {
  DenseVars<S> hidden;
  DenseVars<S> output;
};

template <typename S>
std::vector<Var<S>> unary_head(const FeatureSequence<S>& seq, const UnaryVars<S>& head);

// Shared transition matrix A.
template <typename S>
struct TransitionParams {
  Parameter<S> matrix;

  TransitionParams() = default;
  explicit TransitionParams(const LabelSpace& labels);
  void init(std::mt19937_64& rng);
  static std::size_t count(std::size_t labels) { return labels * labels; }
};

// The trainable matrix itself; the same [L, L] table scores every position.
template <typename S>
Var<S> transition_pairwise(Tape<S>& tape, TransitionParams<S>& params);

// psi_nn: width-2 convolution over [w_t ; w_{t+1}] with a tanh hidden layer and
// an affine projection to L*L scores.
template <typename S>
struct PairwiseHead {
  DenseParams<S> hidden;
  DenseParams<S> output;
  std::size_t labels = 0;

  PairwiseHead() = default;
  PairwiseHead(std::size_t feature_dim, std::size_t width, std::size_t labels);
  void init(std::mt19937_64& rng);
  std::vector<Parameter<S>*> parameters();
  static std::size_t count(std::size_t feature_dim, std::size_t width, std::size_t labels);
};

template <typename S>
struct PairwiseVars {
  DenseVars<S> hidden;
  DenseVars<S> output;
  std::size_t labels = 0;
};

// [B, L, L] scores for label pairs (left, right) from [B, F] features.
template <typename S>
Var<S> pairwise_scores(Var<S> left, Var<S> right, const PairwiseVars<S>& head);

// One table per adjacent pair (t, t+1), zeroed where position t is padding.
// Empty for T = 1.
template <typename S>
std::vector<Var<S>> neural_pairwise(const FeatureSequence<S>& seq, const PairwiseVars<S>& head);

}  // namespace seqcrf
