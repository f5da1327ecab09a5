#include "seqcrf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "seqcrf/optimizer.hpp"

namespace seqcrf {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

template <typename T>
void shuffle(std::vector<T>& v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

}  // namespace

std::vector<FoldAssignment> kfold_split(const Corpus& corpus, std::size_t k, double validation_fraction,
                                        std::uint64_t seed) {
  const std::size_t docs = corpus.documents.size();
  if (k < 2) throw std::invalid_argument("k-fold split needs k >= 2");
  if (docs < k) {
    throw std::invalid_argument("k-fold split needs at least k = " + std::to_string(k) + " documents, corpus has " +
                                std::to_string(docs));
  }
  if (validation_fraction < 0 || validation_fraction >= 1) {
    throw std::invalid_argument("validation fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> order(docs);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, derive_seed(seed, 0));

  std::vector<FoldAssignment> folds(k);
  std::vector<std::size_t> fold_of(docs);
  for (std::size_t i = 0; i < docs; ++i) fold_of[order[i]] = i % k;
  for (std::size_t f = 0; f < k; ++f) {
    FoldAssignment& fa = folds[f];
    fa.index = f;
    std::vector<SentenceRef> pool;
    for (std::size_t d = 0; d < docs; ++d) {
      if (fold_of[d] == f) {
        fa.test_documents.push_back(d);
        continue;
      }
      fa.train_documents.push_back(d);
      for (std::size_t s = 0; s < corpus.documents[d].sentences.size(); ++s) pool.push_back({d, s});
    }
    shuffle(pool, derive_seed(seed, 1 + f));
    std::size_t held = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(pool.size())));
    if (held == 0 && validation_fraction > 0 && pool.size() >= 2) held = 1;
    if (held >= pool.size() && !pool.empty()) held = pool.size() - 1;
    auto by_position = [](const SentenceRef& a, const SentenceRef& b) {
      return a.document != b.document ? a.document < b.document : a.sentence < b.sentence;
    };
    fa.validation_sentences.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(held));
    fa.train_sentences.assign(pool.begin() + static_cast<std::ptrdiff_t>(held), pool.end());
    std::sort(fa.validation_sentences.begin(), fa.validation_sentences.end(), by_position);
    std::sort(fa.train_sentences.begin(), fa.train_sentences.end(), by_position);
  }
  return folds;
}

std::vector<const Sentence*> resolve(const Corpus& corpus, std::span<const SentenceRef> refs) {
  std::vector<const Sentence*> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(&corpus.documents.at(r.document).sentences.at(r.sentence));
  return out;
}

std::vector<const Sentence*> document_sentences(const Corpus& corpus, std::span<const std::size_t> documents) {
  std::vector<const Sentence*> out;
  for (std::size_t d : documents)
    for (const auto& s : corpus.documents.at(d).sentences) out.push_back(&s);
  return out;
}

nlohmann::json TrainingHistory::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"epoch", e.epoch},
                           {"train_loss", e.train_loss},
                           {"validation_f1", e.validation_f1},
                           {"improved", e.improved},
                           {"skipped_steps", e.skipped_steps}});
  }
  return {{"epochs", epochs_json},
          {"best_epoch", best_epoch},
          {"best_validation_f1", best_validation_f1},
          {"stopped_early", stopped_early},
          {"incidents", incidents}};
}

namespace {

struct Snapshot {
  std::vector<std::vector<float>> values;
  NormState<float> norm;
};

Snapshot take_snapshot(SequenceModel<float>& model) {
  Snapshot s;
  for (auto* p : model.parameters()) s.values.push_back(p->value.data);
  s.norm = model.norm_state();
  return s;
}

void restore(SequenceModel<float>& model, const Snapshot& s) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.data = s.values[i];
  model.norm_state() = s.norm;
}

}  // namespace

std::vector<std::vector<int>> predict_labels(SequenceModel<float>& model, const Vocabulary& vocab,
                                             std::span<const Sentence* const> sentences, std::size_t batch_size,
                                             std::size_t max_length) {
  std::vector<std::vector<int>> out(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) out[i].assign(sentences[i]->tokens.size(), 0);
  std::vector<const Sentence*> nonempty;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i]->tokens.empty()) continue;
    nonempty.push_back(sentences[i]);
    where.push_back(i);
  }
  const auto batches = make_batches(nonempty, vocab, model.labels(), batch_size, std::nullopt, max_length);
  for (const auto& batch : batches) {
    const auto paths = model.predict(batch);
    for (std::size_t b = 0; b < batch.rows; ++b) {
      auto& dst = out[where[batch.sentence_ids[b]]];
      std::copy(paths[b].begin(), paths[b].end(), dst.begin());
    }
  }
  return out;
}

std::vector<std::vector<Span>> predict_spans(SequenceModel<float>& model, const Vocabulary& vocab,
                                             std::span<const Sentence* const> sentences, std::size_t batch_size,
                                             std::size_t max_length) {
  const auto labels = predict_labels(model, vocab, sentences, batch_size, max_length);
  std::vector<std::vector<Span>> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(bio_decode(l, model.labels()));
  return out;
}

MetricReport evaluate_model(SequenceModel<float>& model, const Vocabulary& vocab,
                            std::span<const Sentence* const> sentences, std::size_t batch_size,
                            std::size_t max_length) {
  const auto predicted = predict_spans(model, vocab, sentences, batch_size, max_length);
  std::vector<SentencePrediction> rows;
  rows.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    rows.push_back({sentences[i]->tokens.size(), sentences[i]->spans, predicted[i]});
  }
  return evaluate(rows);
}

TrainedModel train(const ExperimentConfig& config, ModelKind kind, std::span<const Sentence* const> training,
                   std::span<const Sentence* const> validation, std::uint64_t seed, std::ostream* log) {
  std::vector<const Sentence*> train_set;
  for (const Sentence* s : training)
    if (!s->tokens.empty()) train_set.push_back(s);
  if (train_set.empty()) throw std::invalid_argument("training split is empty");
  std::vector<const Sentence*> val_set(validation.begin(), validation.end());
  TrainedModel out;
  if (val_set.empty()) {
    val_set = train_set;
    out.history.incidents.push_back("validation split is empty; early stopping monitors the training sentences");
  }

  out.vocab = Vocabulary::build(train_set);
  const LabelSpace labels;
  out.budget = config.resolve_dims(kind, out.vocab.size(), labels.size());
  if (!out.budget.warning.empty()) out.history.incidents.push_back(out.budget.warning);
  out.model = std::make_unique<SequenceModel<float>>(kind, out.budget.dims, config.model_options(), labels);
  SequenceModel<float>& model = *out.model;
  model.init(derive_seed(seed, 1));
  if (!config.pretrained_embeddings.empty()) {
    const Vocabulary& v = out.vocab;
    load_pretrained_embeddings(
        config.pretrained_embeddings,
        [&v](std::string_view tok) -> std::optional<int> {
          const int i = v.index(tok);
          return i == Vocabulary::kUnknown ? std::nullopt : std::optional<int>(i);
        },
        *model.parameters().front());
  }

  auto params = model.parameters();
  OptimizerState<float> opt(params, config.optimizer);
  std::mt19937_64 rng(derive_seed(seed, 2));
  Snapshot best = take_snapshot(model);
  double best_f1 = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto batches = make_batches(train_set, out.vocab, labels, config.batch_size,
                                      derive_seed(seed, 100 + epoch), config.max_length);
    double total = 0.0;
    const std::size_t skipped_before = opt.skipped;
    for (const auto& batch : batches) {
      for (auto* p : params) p->zero_grad();
      Tape<float> tape;
      Var<float> loss = model.loss(tape, batch, true, &rng);
      tape.backward(ag::scale(loss, 1.0f / static_cast<float>(batch.rows)));
      total += static_cast<double>(loss.item());
      clip_gradients<float>(params, config.clip_norm);
      adagrad_momentum_step<float>(params, opt);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(train_set.size());
    rec.skipped_steps = opt.skipped - skipped_before;
    rec.validation_f1 =
        evaluate_model(model, out.vocab, val_set, config.batch_size, config.max_length).strict_micro().f1();
    rec.improved = rec.validation_f1 > best_f1;
    if (rec.improved) {
      best_f1 = rec.validation_f1;
      best = take_snapshot(model);
      out.history.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    out.history.epochs.push_back(rec);
    if (log) {
      *log << model_kind_name(kind) << " epoch " << epoch << " loss " << rec.train_loss << " val-f1 "
           << rec.validation_f1 << (rec.improved ? " *" : "") << '\n';
    }
    if (since_best > config.patience) {
      out.history.stopped_early = true;
      break;
    }
  }
  restore(model, best);
  out.history.best_validation_f1 = std::max(best_f1, 0.0);
  out.history.incidents.insert(out.history.incidents.end(), opt.incidents.begin(), opt.incidents.end());
  return out;
}

}  // namespace seqcrf
