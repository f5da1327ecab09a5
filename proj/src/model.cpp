#include "seqcrf/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace seqcrf {

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBaseline: return "baseline";
    case ModelKind::kCrf: return "crf";
    case ModelKind::kCrfPair: return "crf-pair";
    case ModelKind::kSkipChain: return "skipchain";
  }
  return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  if (name == "baseline") return ModelKind::kBaseline;
  if (name == "crf" || name == "chain-crf") return ModelKind::kCrf;
  if (name == "crf-pair" || name == "chain-crf-pair") return ModelKind::kCrfPair;
  if (name == "skipchain" || name == "skip-chain") return ModelKind::kSkipChain;
  return std::nullopt;
}

std::string_view objective_name(Objective o) {
  switch (o) {
    case Objective::kDefault: return "default";
    case Objective::kSequenceNll: return "sequence-nll";
    case Objective::kMarginalCe: return "marginal-ce";
  }
  return "?";
}

std::optional<Objective> parse_objective(std::string_view name) {
  if (name == "default") return Objective::kDefault;
  if (name == "sequence-nll" || name == "nll") return Objective::kSequenceNll;
  if (name == "marginal-ce" || name == "ce") return Objective::kMarginalCe;
  return std::nullopt;
}

std::size_t parameter_count(ModelKind kind, const ModelDims& d, std::size_t labels) {
  const std::size_t f = d.features();
  std::size_t n = d.vocab * d.embedding + 2 * LstmParams<float>::count(d.embedding, d.hidden);
  switch (kind) {
    case ModelKind::kBaseline:
      return n + DenseParams<float>::count(f, labels);
    case ModelKind::kCrf:
      n += UnaryHead<float>::count(f, d.resolved_unary_width(), labels) + TransitionParams<float>::count(labels);
      break;
    case ModelKind::kCrfPair:
      n += UnaryHead<float>::count(f, d.resolved_unary_width(), labels) +
           PairwiseHead<float>::count(f, d.resolved_pairwise_width(), labels);
      break;
    case ModelKind::kSkipChain:
      return n + UnaryHead<float>::count(f, d.resolved_unary_width(), labels) +
             PairwiseHead<float>::count(f, d.resolved_pairwise_width(), labels) +
             BetaEstimator<float>::count(labels, d.resolved_beta_width());
  }
  if (d.boundary_potentials) n += 2 * labels;
  return n;
}

template <typename S>
SequenceModel<S>::SequenceModel(ModelKind kind, ModelDims dims, ModelOptions options, LabelSpace labels)
    : kind_(kind), dims_(dims), options_(options), labels_(std::move(labels)) {
  if (dims_.vocab == 0 || dims_.embedding == 0 || dims_.hidden == 0) {
    throw std::invalid_argument("model dimensions must be positive (vocab " + std::to_string(dims_.vocab) +
                                ", embedding " + std::to_string(dims_.embedding) + ", hidden " +
                                std::to_string(dims_.hidden) + ")");
  }
  if (options_.objective == Objective::kSequenceNll &&
      (kind_ == ModelKind::kBaseline || kind_ == ModelKind::kSkipChain)) {
    throw std::invalid_argument("sequence NLL objective needs a chain model, not " +
                                std::string(model_kind_name(kind_)));
  }
  if (options_.embedding_dropout < 0 || options_.embedding_dropout >= 1 || options_.feature_dropout < 0 ||
      options_.feature_dropout >= 1) {
    throw std::invalid_argument("dropout probabilities must lie in [0, 1)");
  }
  const std::size_t l = labels_.size(), f = dims_.features();
  embedding_ = Parameter<S>("embedding", {dims_.vocab, dims_.embedding});
  fwd_ = LstmParams<S>("lstm.forward", dims_.embedding, dims_.hidden);
  bwd_ = LstmParams<S>("lstm.backward", dims_.embedding, dims_.hidden);
  norm_ = NormState<S>(f);
  switch (kind_) {
    case ModelKind::kBaseline:
      softmax_ = DenseParams<S>("softmax", f, l);
      break;
    case ModelKind::kSkipChain:
      beta_ = BetaEstimator<S>(l, dims_.resolved_beta_width());
      [[fallthrough]];
    case ModelKind::kCrfPair:
      pairwise_ = PairwiseHead<S>(f, dims_.resolved_pairwise_width(), l);
      unary_ = UnaryHead<S>(f, dims_.resolved_unary_width(), l);
      break;
    case ModelKind::kCrf:
      unary_ = UnaryHead<S>(f, dims_.resolved_unary_width(), l);
      transition_ = TransitionParams<S>(labels_);
      break;
  }
  if (dims_.boundary_potentials && (kind_ == ModelKind::kCrf || kind_ == ModelKind::kCrfPair)) {
    start_ = Parameter<S>("boundary.start", {1, l});
    stop_ = Parameter<S>("boundary.stop", {1, l});
  }
}

template <typename S>
Objective SequenceModel<S>::objective() const {
  if (options_.objective != Objective::kDefault) return options_.objective;
  return (kind_ == ModelKind::kCrf || kind_ == ModelKind::kCrfPair) ? Objective::kSequenceNll
                                                                    : Objective::kMarginalCe;
}

template <typename S>
void SequenceModel<S>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  init_uniform(embedding_, rng, 0.1);
  init_lstm(fwd_, rng);
  init_lstm(bwd_, rng);
  norm_ = NormState<S>(dims_.features());
  switch (kind_) {
    case ModelKind::kBaseline:
      init_uniform(softmax_.weight, rng,
                   std::sqrt(6.0 / static_cast<double>(softmax_.in_dim() + softmax_.out_dim())));
      std::fill(softmax_.bias.value.data.begin(), softmax_.bias.value.data.end(), S(0));
      break;
    case ModelKind::kCrf:
      unary_.init(rng);
      transition_.init(rng);
      break;
    case ModelKind::kSkipChain:
      unary_.init(rng);
      pairwise_.init(rng);
      beta_.init(rng);
      break;
    case ModelKind::kCrfPair:
      unary_.init(rng);
      pairwise_.init(rng);
      break;
  }
  std::fill(start_.value.data.begin(), start_.value.data.end(), S(0));
  std::fill(stop_.value.data.begin(), stop_.value.data.end(), S(0));
  for (auto* p : parameters()) p->zero_grad();
}

template <typename S>
std::vector<Parameter<S>*> SequenceModel<S>::parameters() {
  std::vector<Parameter<S>*> out{&embedding_};
  auto take = [&](std::vector<Parameter<S>*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  take(fwd_.parameters());
  take(bwd_.parameters());
  switch (kind_) {
    case ModelKind::kBaseline:
      take(softmax_.parameters());
      break;
    case ModelKind::kCrf:
      take(unary_.parameters());
      out.push_back(&transition_.matrix);
      break;
    case ModelKind::kCrfPair:
      take(unary_.parameters());
      take(pairwise_.parameters());
      break;
    case ModelKind::kSkipChain:
      take(unary_.parameters());
      take(pairwise_.parameters());
      take(beta_.parameters());
      break;
  }
  if (start_.value.size() > 0) {
    out.push_back(&start_);
    out.push_back(&stop_);
  }
  return out;
}

template <typename S>
std::size_t SequenceModel<S>::parameter_count() const {
  std::size_t n = 0;
  for (auto* p : const_cast<SequenceModel*>(this)->parameters()) n += p->value.size();
  return n;
}

template <typename S>
FeatureSequence<S> SequenceModel<S>::features(Tape<S>& tape, const SequenceBatch& batch, bool training,
                                              std::mt19937_64* rng) {
  if (training && rng == nullptr) throw std::invalid_argument("training mode needs a random generator");
  const Array<S> mask = batch.mask_array<S>();
  FeatureSequence<S> seq = embed(tape.parameter(embedding_), std::span<const int>(batch.tokens), mask);
  if (training && options_.embedding_dropout > 0) seq = apply_dropout(seq, options_.embedding_dropout, *rng);
  seq = bilstm_apply(seq, fwd_.bind(tape), bwd_.bind(tape));
  if (options_.normalize_features) {
    seq = feature_normalize(seq, norm_, training ? NormMode::kBatch : NormMode::kRunning);
  }
  if (training && options_.feature_dropout > 0) seq = apply_dropout(seq, options_.feature_dropout, *rng);
  return seq;
}

template <typename S>
typename SequenceModel<S>::Graph SequenceModel<S>::build(Tape<S>& tape, const SequenceBatch& batch,
                                                         bool training, std::mt19937_64* rng) {
  if (batch.rows == 0) throw std::invalid_argument("empty batch");
  for (std::size_t b = 0; b < batch.rows; ++b) {
    if (batch.lengths[b] == 0) throw std::invalid_argument("batch row " + std::to_string(b) + " is empty");
  }
  FeatureSequence<S> seq = features(tape, batch, training, rng);
  const std::size_t rows = batch.rows, len = batch.width, l = labels_.size();

  Graph g;
  g.pot.labels = l;
  g.pot.mask = seq.mask;
  if (kind_ == ModelKind::kBaseline) {
    g.pot.unary = dense_affine(seq, softmax_.bind(tape)).steps;
  } else {
    UnaryVars<S> uv{unary_.hidden.bind(tape), unary_.output.bind(tape)};
    g.pot.unary = unary_head(seq, uv);
  }
  if (kind_ == ModelKind::kCrf) g.pot.transition = transition_pairwise(tape, transition_);
  if (kind_ == ModelKind::kCrfPair || kind_ == ModelKind::kSkipChain) {
    PairwiseVars<S> pv{pairwise_.hidden.bind(tape), pairwise_.output.bind(tape), l};
    g.pot.pairwise = neural_pairwise(seq, pv);
  }
  if (start_.value.size() > 0) {
    Var<S> start = tape.parameter(start_);
    for (std::size_t t = 0; t < len; ++t) {
      Array<S> first({rows, 1});
      bool any = false;
      for (std::size_t b = 0; b < rows; ++b) {
        if (batch.offset(b) == t) {
          first(b, 0) = S(1);
          any = true;
        }
      }
      if (any) g.pot.unary[t] = ag::add(g.pot.unary[t], ag::mul(start, tape.constant(std::move(first))));
    }
    g.pot.unary[len - 1] = ag::add(g.pot.unary[len - 1], tape.parameter(stop_));
  }

  if (kind_ == ModelKind::kBaseline) {
    for (std::size_t t = 0; t < len; ++t) {
      Var<S> z = ag::reshape(ag::logsumexp(g.pot.unary[t], 1), {rows, 1});
      g.log_probs.push_back(ag::sub(g.pot.unary[t], z));
    }
  } else if (kind_ == ModelKind::kSkipChain) {
    MessageVars<S> msgs = beta_recurrent(g.pot, beta_.bind(tape));
    g.log_probs = skip_log_marginals(g.pot, msgs);
  }
  return g;
}

template <typename S>
Var<S> SequenceModel<S>::loss(Tape<S>& tape, const SequenceBatch& full, bool training, std::mt19937_64* rng) {
  const SequenceBatch batch = full.cropped(full.max_length());
  Graph g = build(tape, batch, training, rng);
  const std::span<const int> gold(batch.labels);
  if (!g.log_probs.empty()) return skipchain_batch_loss(g.log_probs, gold, g.pot.mask);
  return objective() == Objective::kSequenceNll ? chain_sequence_nll(g.pot, gold) : chain_marginal_ce(g.pot, gold);
}

template <typename S>
PotentialVars<S> SequenceModel<S>::potentials(Tape<S>& tape, const SequenceBatch& full) {
  return build(tape, full.cropped(full.max_length()), false, nullptr).pot;
}

template <typename S>
std::vector<std::vector<int>> SequenceModel<S>::predict(const SequenceBatch& full) {
  const SequenceBatch batch = full.cropped(full.max_length());
  Tape<S> tape;
  Graph g = build(tape, batch, false, nullptr);
  std::vector<std::vector<int>> out(batch.rows);
  if (!g.log_probs.empty()) {
    const std::size_t l = labels_.size();
    for (std::size_t b = 0; b < batch.rows; ++b) {
      for (std::size_t t = batch.offset(b); t < batch.width; ++t) {
        auto row = g.log_probs[t].value().subspan(b * l, l);
        out[b].push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
      }
    }
    return out;
  }
  const TransitionMask mask = bio_transition_mask(labels_);
  for (std::size_t b = 0; b < batch.rows; ++b) {
    out[b] = viterbi_decode(g.pot.sentence(b), options_.constrained_decoding ? &mask : nullptr).path;
  }
  return out;
}

template <typename S>
std::vector<std::vector<S>> SequenceModel<S>::marginals(const SequenceBatch& full) {
  const SequenceBatch batch = full.cropped(full.max_length());
  Tape<S> tape;
  Graph g = build(tape, batch, false, nullptr);
  std::vector<std::vector<S>> out(batch.rows);
  const std::size_t l = labels_.size();
  for (std::size_t b = 0; b < batch.rows; ++b) {
    if (g.log_probs.empty()) {
      out[b] = posterior_marginals(g.pot.sentence(b));
      continue;
    }
    for (std::size_t t = batch.offset(b); t < batch.width; ++t) {
      auto row = g.log_probs[t].value().subspan(b * l, l);
      for (S v : row) out[b].push_back(std::exp(v));
    }
  }
  return out;
}

template <typename S>
nlohmann::json SequenceModel<S>::describe() const {
  std::vector<std::string> cats;
  for (Category c : labels_.categories()) cats.emplace_back(category_name(c));
  return {{"kind", model_kind_name(kind_)},
          {"vocab", dims_.vocab},
          {"embedding", dims_.embedding},
          {"hidden", dims_.hidden},
          {"unary_width", dims_.resolved_unary_width()},
          {"pairwise_width", dims_.resolved_pairwise_width()},
          {"beta_width", dims_.resolved_beta_width()},
          {"boundary_potentials", dims_.boundary_potentials},
          {"embedding_dropout", options_.embedding_dropout},
          {"feature_dropout", options_.feature_dropout},
          {"normalize_features", options_.normalize_features},
          {"constrained_decoding", options_.constrained_decoding},
          {"objective", objective_name(objective())},
          {"categories", cats},
          {"parameters", parameter_count()}};
}

template class SequenceModel<float>;
template class SequenceModel<double>;

}  // namespace seqcrf
