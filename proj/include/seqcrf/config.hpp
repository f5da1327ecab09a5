#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqcrf/budget.hpp"
#include "seqcrf/model.hpp"
#include "seqcrf/optimizer.hpp"

namespace seqcrf {

enum class DropoutPlacement { kBoth, kEmbedding, kFeatures, kNone };

struct ExperimentConfig {
  std::vector<ModelKind> models{ModelKind::kBaseline};  // first entry is the model for `train`
  std::size_t embedding_dim = 200;
  std::size_t hidden_size = 0;  // 0: resolved by the parameter budget
  bool budget_mode = true;
  double budget_target = kParameterBudget;
  std::size_t unary_width = 0;
  std::size_t pairwise_width = 0;
  std::size_t beta_width = 0;
  bool boundary_potentials = false;
  double dropout = 0.5;
  DropoutPlacement dropout_placement = DropoutPlacement::kBoth;
  bool normalize_features = true;
  bool constrained_decoding = false;
  Objective objective = Objective::kDefault;
  std::size_t batch_size = 64;
  std::size_t max_length = 50;
  std::size_t folds = 10;
  double validation_fraction = 0.2;
  std::size_t patience = 5;
  std::size_t max_epochs = 50;
  std::uint64_t seed = 1;
  OptimizerSettings optimizer;
  double clip_norm = 5.0;
  std::string pretrained_embeddings;

  // Unknown keys and out-of-range values are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;

  ModelOptions model_options() const;
  // Dimensions for `kind` over a vocabulary of `vocab` entries; with budget
  // mode on and no explicit hidden size, the budget resolver picks it.
  BudgetResolution resolve_dims(ModelKind kind, std::size_t vocab, std::size_t labels = 19) const;
};

}  // namespace seqcrf
