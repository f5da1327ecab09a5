#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "seqcrf/config.hpp"
#include "seqcrf/corpus.hpp"
#include "seqcrf/eval.hpp"
#include "seqcrf/model.hpp"

namespace seqcrf {

// Independent stream seed from a master seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

struct SentenceRef {
  std::size_t document = 0;
  std::size_t sentence = 0;
  friend bool operator==(const SentenceRef&, const SentenceRef&) = default;
};

struct FoldAssignment {
  std::size_t index = 0;
  std::vector<std::size_t> test_documents;
  std::vector<std::size_t> train_documents;
  std::vector<SentenceRef> train_sentences;       // training documents minus validation
  std::vector<SentenceRef> validation_sentences;  // drawn from the training documents
};

// Documents are shuffled with `seed` and dealt round-robin into k test folds.
// Within each fold a `validation_fraction` share of the training sentences
// (rounded, at least one when there are two or more) is held out.
std::vector<FoldAssignment> kfold_split(const Corpus& corpus, std::size_t k, double validation_fraction,
                                        std::uint64_t seed);

std::vector<const Sentence*> resolve(const Corpus& corpus, std::span<const SentenceRef> refs);
std::vector<const Sentence*> document_sentences(const Corpus& corpus, std::span<const std::size_t> documents);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per sentence over the epoch
  double validation_f1 = 0.0;
  bool improved = false;
  std::size_t skipped_steps = 0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation_f1 = 0.0;
  bool stopped_early = false;
  std::vector<std::string> incidents;

  nlohmann::json to_json() const;
};

struct TrainedModel {
  std::unique_ptr<SequenceModel<float>> model;
  Vocabulary vocab;
  BudgetResolution budget;
  TrainingHistory history;
};

// Trains one model. Stops once validation strict F1 has failed to improve for
// more than `patience` consecutive epochs and restores the best parameters.
// An empty validation list falls back to the training sentences.
TrainedModel train(const ExperimentConfig& config, ModelKind kind, std::span<const Sentence* const> training,
                   std::span<const Sentence* const> validation, std::uint64_t seed, std::ostream* log = nullptr);

// Predicted spans per sentence; tokens past the crop width are left unlabelled.
std::vector<std::vector<Span>> predict_spans(SequenceModel<float>& model, const Vocabulary& vocab,
                                             std::span<const Sentence* const> sentences, std::size_t batch_size,
                                             std::size_t max_length);

// Predicted label indices per sentence (full length, O past the crop width).
std::vector<std::vector<int>> predict_labels(SequenceModel<float>& model, const Vocabulary& vocab,
                                             std::span<const Sentence* const> sentences, std::size_t batch_size,
                                             std::size_t max_length);

MetricReport evaluate_model(SequenceModel<float>& model, const Vocabulary& vocab,
                            std::span<const Sentence* const> sentences, std::size_t batch_size,
                            std::size_t max_length);

}  // namespace seqcrf
