#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "seqcrf/autodiff.hpp"

namespace seqcrf {

// Per-position feature vectors for a padded batch. steps[t] is [B, D]; mask is
// [B, T] with 1 at valid positions. Padding is a prefix of every row, and every
// layer leaves padded positions at exactly zero.
template <typename S>
struct FeatureSequence {
  std::vector<Var<S>> steps;
  Array<S> mask;

  std::size_t batch() const { return mask.shape.at(0); }
  std::size_t length() const { return mask.shape.at(1); }
  std::size_t dim() const { return steps.empty() ? 0 : steps.front().shape().at(1); }
};

// [B, 1] constant holding column t of mask (or 1 - mask when complement).
template <typename S>
Var<S> mask_column(Tape<S>& tape, const Array<S>& mask, std::size_t t, bool complement = false);

// Handles to a parameter group on one tape.
template <typename S>
struct DenseVars {
  Var<S> weight;
  Var<S> bias;
};

// Affine map x*W + b with W: [in, out], b: [1, out].
template <typename S>
struct DenseParams {
  Parameter<S> weight;
  Parameter<S> bias;

  DenseParams() = default;
  DenseParams(const std::string& name, std::size_t in, std::size_t out);
  std::size_t in_dim() const { return weight.value.shape[0]; }
  std::size_t out_dim() const { return weight.value.shape[1]; }
  DenseVars<S> bind(Tape<S>& tape) { return {tape.parameter(weight), tape.parameter(bias)}; }
  std::vector<Parameter<S>*> parameters() { return {&weight, &bias}; }
  static std::size_t count(std::size_t in, std::size_t out) { return in * out + out; }
};

template <typename S>
struct LstmVars {
  Var<S> w_input;
  Var<S> w_hidden;
  Var<S> bias;
  std::size_t hidden = 0;
};

// Gate blocks are laid out [input | forget | cell | output] along the 4H axis.
template <typename S>
struct LstmParams {
  Parameter<S> w_input;   // [in, 4H]
  Parameter<S> w_hidden;  // [H, 4H]
  Parameter<S> bias;      // [1, 4H]

  LstmParams() = default;
  LstmParams(const std::string& name, std::size_t in, std::size_t hidden);
  std::size_t input_dim() const { return w_input.value.shape[0]; }
  std::size_t hidden() const { return w_hidden.value.shape[0]; }
  LstmVars<S> bind(Tape<S>& tape) {
    return {tape.parameter(w_input), tape.parameter(w_hidden), tape.parameter(bias), hidden()};
  }
  std::vector<Parameter<S>*> parameters() { return {&w_input, &w_hidden, &bias}; }
  static std::size_t count(std::size_t in, std::size_t hidden) {
    return 4 * hidden * (in + hidden) + 4 * hidden;
  }
};

// Uniform(-0.08, 0.08) weights; zero biases except forget gate = 1.
template <typename S>
void init_lstm(LstmParams<S>& p, std::mt19937_64& rng);
template <typename S>
void init_uniform(Parameter<S>& p, std::mt19937_64& rng, double limit);

template <typename S>
Var<S> embed_step(Var<S> table, std::span<const int> tokens, Var<S> mask_col);

// Looks up every column of tokens ([B, T] row-major). Indices must be < rows.
template <typename S>
FeatureSequence<S> embed(Var<S> table, std::span<const int> tokens, const Array<S>& mask);

template <typename S>
struct LstmStep {
  Var<S> hidden;
  Var<S> cell;
};

template <typename S>
LstmStep<S> lstm_step(Var<S> input, Var<S> prev_hidden, Var<S> prev_cell, const LstmVars<S>& p);

// Runs a single direction. Masked positions pass the state through unchanged
// and emit zeros. `reverse` walks from the last position to the first.
template <typename S>
std::vector<Var<S>> lstm_scan(const FeatureSequence<S>& seq, const LstmVars<S>& p, bool reverse);

// Output at t is [forward state at t ; backward state at t].
template <typename S>
FeatureSequence<S> bilstm_apply(const FeatureSequence<S>& seq, const LstmVars<S>& fwd,
                                const LstmVars<S>& bwd);

// Per-position tanh(x W + b), masked.
template <typename S>
FeatureSequence<S> dense_tanh(const FeatureSequence<S>& seq, const DenseVars<S>& p);
// Per-position x W + b, masked.
template <typename S>
FeatureSequence<S> dense_affine(const FeatureSequence<S>& seq, const DenseVars<S>& p);

// Running statistics for feature_normalize.
template <typename S>
struct NormState {
  std::vector<S> mean;
  std::vector<S> var;
  S momentum = S(0.9);

  NormState() = default;
  explicit NormState(std::size_t dim) : mean(dim, S(0)), var(dim, S(1)) {}
};

enum class NormMode {
  kBatch,    // statistics of the valid positions of this batch; updates running stats
  kRunning,  // stored running statistics
};

inline constexpr double kVarianceFloor = 1e-5;

// Per-feature standardisation over valid positions only.
template <typename S>
FeatureSequence<S> feature_normalize(const FeatureSequence<S>& seq, NormState<S>& state,
                                     NormMode mode);

// Inverted dropout with drop probability p; identity when p == 0.
template <typename S>
FeatureSequence<S> apply_dropout(const FeatureSequence<S>& seq, double p, std::mt19937_64& rng);

// Text embedding file: "token v1 v2 ... vD" per line. Rows of `table` whose
// token is found via `lookup` are overwritten. Returns the number of rows set.
std::size_t load_pretrained_embeddings(
    const std::string& path, const std::function<std::optional<int>(std::string_view)>& lookup,
    Parameter<float>& table);

}  // namespace seqcrf
