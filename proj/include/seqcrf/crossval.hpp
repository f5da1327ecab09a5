#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqcrf/config.hpp"
#include "seqcrf/corpus.hpp"
#include "seqcrf/eval.hpp"
#include "seqcrf/trainer.hpp"

namespace seqcrf {

// Worker cap for fold-parallel jobs: SEQCRF_THREADS when set to a positive
// integer, otherwise the OpenMP default.
std::size_t fold_threads();

struct CrossvalOptions {
  std::size_t threads = 0;  // 0: fold_threads()
  std::ostream* log = nullptr;
};

struct ModelComparison {
  ModelKind a = ModelKind::kBaseline;
  ModelKind b = ModelKind::kBaseline;
  TTestResult test;  // on per-fold strict micro F1, a minus b
};

struct CrossvalResult {
  std::vector<ModelKind> models;
  std::size_t folds = 0;
  std::vector<std::vector<MetricReport>> reports;       // [model][fold]
  std::vector<std::vector<TrainingHistory>> histories;  // [model][fold]
  std::vector<std::vector<BudgetResolution>> budgets;   // [model][fold]
  std::vector<MetricReport> summary;                    // [model], counts pooled over folds
  std::vector<ModelComparison> comparisons;             // every pair of models

  std::vector<double> strict_f1(std::size_t model) const;
  nlohmann::json fold_json(std::size_t fold) const;
  nlohmann::json summary_json(const ExperimentConfig& config) const;
  std::string summary_table() const;
};

// Trains and evaluates every configured model on every fold. Each (fold,
// model) job is seeded from the master seed and the fold index only, so the
// result does not depend on the number of workers.
CrossvalResult run_crossval(const ExperimentConfig& config, const Corpus& corpus, const CrossvalOptions& options = {});

// Writes fold-<i>.json for every fold plus summary.json and summary.txt.
void write_crossval(const CrossvalResult& result, const ExperimentConfig& config, const std::string& out_dir);

}  // namespace seqcrf
