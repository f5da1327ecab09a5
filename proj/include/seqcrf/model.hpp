#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "seqcrf/chain_crf.hpp"
#include "seqcrf/corpus.hpp"
#include "seqcrf/layers.hpp"
#include "seqcrf/potentials.hpp"
#include "seqcrf/skipchain.hpp"

namespace seqcrf {

enum class ModelKind { kBaseline, kCrf, kCrfPair, kSkipChain };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::kBaseline, ModelKind::kCrf, ModelKind::kCrfPair,
                                               ModelKind::kSkipChain};

// "baseline", "crf", "crf-pair", "skipchain"
std::string_view model_kind_name(ModelKind kind);
// Also accepts "chain-crf" and "chain-crf-pair".
std::optional<ModelKind> parse_model_kind(std::string_view name);

enum class Objective {
  kDefault,      // sequence NLL for chain models, marginal cross-entropy otherwise
  kSequenceNll,  // chain models only
  kMarginalCe,
};

std::string_view objective_name(Objective o);
std::optional<Objective> parse_objective(std::string_view name);

struct ModelDims {
  std::size_t vocab = 0;
  std::size_t embedding = 200;
  std::size_t hidden = 200;          // per LSTM direction
  std::size_t unary_width = 0;       // 0: same as hidden
  std::size_t pairwise_width = 0;    // 0: hidden / 2
  std::size_t beta_width = 0;        // skip-chain message LSTM width; 0: hidden / 4
  bool boundary_potentials = false;  // learned start/stop scores for chain models

  std::size_t features() const { return 2 * hidden; }
  std::size_t resolved_unary_width() const { return unary_width ? unary_width : hidden; }
  std::size_t resolved_pairwise_width() const { return pairwise_width ? pairwise_width : std::max<std::size_t>(1, hidden / 2); }
  std::size_t resolved_beta_width() const { return beta_width ? beta_width : std::max<std::size_t>(1, hidden / 4); }
};

struct ModelOptions {
  double embedding_dropout = 0.5;
  double feature_dropout = 0.5;
  bool normalize_features = true;
  bool constrained_decoding = false;  // forbid illegal BIO transitions in Viterbi
  Objective objective = Objective::kDefault;
};

// Closed-form trainable parameter count.
std::size_t parameter_count(ModelKind kind, const ModelDims& dims, std::size_t labels);

template <typename S>
class SequenceModel {
 public:
  SequenceModel(ModelKind kind, ModelDims dims, ModelOptions options = {}, LabelSpace labels = {});

  void init(std::uint64_t seed);

  ModelKind kind() const { return kind_; }
  const ModelDims& dims() const { return dims_; }
  const ModelOptions& options() const { return options_; }
  ModelOptions& options() { return options_; }
  const LabelSpace& labels() const { return labels_; }
  Objective objective() const;

  std::vector<Parameter<S>*> parameters();
  std::size_t parameter_count() const;
  NormState<S>& norm_state() { return norm_; }
  const NormState<S>& norm_state() const { return norm_; }

  // Summed loss over the valid positions of the batch. Training mode applies
  // dropout (drawn from rng) and batch statistics for normalisation.
  Var<S> loss(Tape<S>& tape, const SequenceBatch& batch, bool training, std::mt19937_64* rng);

  // Potentials of the batch in inference mode (no dropout, running statistics).
  PotentialVars<S> potentials(Tape<S>& tape, const SequenceBatch& batch);

  // Label sequences for the valid positions of every row.
  std::vector<std::vector<int>> predict(const SequenceBatch& batch);

  // Per-position label distributions of the valid positions of every row:
  // softmax for the baseline, exact marginals for chain models, approximate
  // marginals for the skip-chain model.
  std::vector<std::vector<S>> marginals(const SequenceBatch& batch);

  nlohmann::json describe() const;

 private:
  struct Graph {
    PotentialVars<S> pot;
    std::vector<Var<S>> log_probs;  // baseline and skip-chain
  };
  Graph build(Tape<S>& tape, const SequenceBatch& batch, bool training, std::mt19937_64* rng);
  FeatureSequence<S> features(Tape<S>& tape, const SequenceBatch& batch, bool training, std::mt19937_64* rng);

  ModelKind kind_;
  ModelDims dims_;
  ModelOptions options_;
  LabelSpace labels_;

  Parameter<S> embedding_;
  LstmParams<S> fwd_;
  LstmParams<S> bwd_;
  NormState<S> norm_;
  DenseParams<S> softmax_;
  UnaryHead<S> unary_;
  TransitionParams<S> transition_;
  PairwiseHead<S> pairwise_;
  BetaEstimator<S> beta_;
  Parameter<S> start_;
  Parameter<S> stop_;
};

extern template class SequenceModel<float>;
extern template class SequenceModel<double>;

}  // namespace seqcrf
