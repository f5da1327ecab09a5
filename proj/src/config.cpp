#include "seqcrf/config.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace seqcrf {

namespace {

std::string_view placement_name(DropoutPlacement p) {
  switch (p) {
    case DropoutPlacement::kBoth: return "both";
    case DropoutPlacement::kEmbedding: return "embedding";
    case DropoutPlacement::kFeatures: return "features";
    case DropoutPlacement::kNone: return "none";
  }
  return "?";
}

DropoutPlacement parse_placement(const std::string& s) {
  if (s == "both") return DropoutPlacement::kBoth;
  if (s == "embedding") return DropoutPlacement::kEmbedding;
  if (s == "features") return DropoutPlacement::kFeatures;
  if (s == "none") return DropoutPlacement::kNone;
  throw std::invalid_argument("unknown dropout_placement '" + s + "' (both, embedding, features, none)");
}

ModelKind kind_from(const nlohmann::json& v) {
  const auto name = v.get<std::string>();
  auto k = parse_model_kind(name);
  if (!k) throw std::invalid_argument("unknown model kind '" + name + "' (baseline, crf, crf-pair, skipchain)");
  return *k;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "model") {
        c.models = {kind_from(v)};
      } else if (key == "models") {
        c.models.clear();
        for (const auto& m : v) c.models.push_back(kind_from(m));
      } else if (key == "embedding_dim") {
        c.embedding_dim = v.get<std::size_t>();
      } else if (key == "hidden_size") {
        c.hidden_size = v.get<std::size_t>();
      } else if (key == "budget_mode") {
        c.budget_mode = v.get<bool>();
      } else if (key == "budget_target") {
        c.budget_target = v.get<double>();
      } else if (key == "unary_width") {
        c.unary_width = v.get<std::size_t>();
      } else if (key == "pairwise_width") {
        c.pairwise_width = v.get<std::size_t>();
      } else if (key == "beta_width") {
        c.beta_width = v.get<std::size_t>();
      } else if (key == "boundary_potentials") {
        c.boundary_potentials = v.get<bool>();
      } else if (key == "dropout") {
        c.dropout = v.get<double>();
      } else if (key == "dropout_placement") {
        c.dropout_placement = parse_placement(v.get<std::string>());
      } else if (key == "normalize_features") {
        c.normalize_features = v.get<bool>();
      } else if (key == "constrained_decoding") {
        c.constrained_decoding = v.get<bool>();
      } else if (key == "objective") {
        const auto name = v.get<std::string>();
        auto o = parse_objective(name);
        if (!o) throw std::invalid_argument("unknown objective '" + name + "' (default, sequence-nll, marginal-ce)");
        c.objective = *o;
      } else if (key == "batch_size") {
        c.batch_size = v.get<std::size_t>();
      } else if (key == "max_length") {
        c.max_length = v.get<std::size_t>();
      } else if (key == "folds") {
        c.folds = v.get<std::size_t>();
      } else if (key == "validation_fraction") {
        c.validation_fraction = v.get<double>();
      } else if (key == "patience") {
        c.patience = v.get<std::size_t>();
      } else if (key == "max_epochs") {
        c.max_epochs = v.get<std::size_t>();
      } else if (key == "seed") {
        c.seed = v.get<std::uint64_t>();
      } else if (key == "learning_rate") {
        c.optimizer.learning_rate = v.get<double>();
      } else if (key == "momentum") {
        c.optimizer.momentum = v.get<double>();
      } else if (key == "epsilon") {
        c.optimizer.epsilon = v.get<double>();
      } else if (key == "clip_norm") {
        c.clip_norm = v.get<double>();
      } else if (key == "pretrained_embeddings") {
        c.pretrained_embeddings = v.get<std::string>();
      } else {
        throw std::invalid_argument("unknown config key '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("config: " + what);
  };
  require(!models.empty(), "models must not be empty");
  require(embedding_dim > 0, "embedding_dim must be positive");
  require(hidden_size > 0 || budget_mode, "hidden_size must be set when budget_mode is off");
  require(budget_target > 0, "budget_target must be positive");
  require(dropout >= 0 && dropout < 1, "dropout must lie in [0, 1)");
  require(batch_size > 0, "batch_size must be positive");
  require(max_length > 0, "max_length must be positive");
  require(folds >= 2, "folds must be at least 2");
  require(validation_fraction > 0 && validation_fraction < 1, "validation_fraction must lie in (0, 1)");
  require(max_epochs > 0, "max_epochs must be positive");
  require(optimizer.learning_rate > 0, "learning_rate must be positive");
  require(optimizer.momentum >= 0 && optimizer.momentum < 1, "momentum must lie in [0, 1)");
  require(optimizer.epsilon > 0, "epsilon must be positive");
  require(clip_norm >= 0, "clip_norm must not be negative");
  for (ModelKind m : models) {
    require(!(objective == Objective::kSequenceNll && (m == ModelKind::kBaseline || m == ModelKind::kSkipChain)),
            "objective sequence-nll applies only to crf and crf-pair models");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  std::vector<std::string> names;
  for (ModelKind m : models) names.emplace_back(model_kind_name(m));
  return {{"models", names},
          {"embedding_dim", embedding_dim},
          {"hidden_size", hidden_size},
          {"budget_mode", budget_mode},
          {"budget_target", budget_target},
          {"unary_width", unary_width},
          {"pairwise_width", pairwise_width},
          {"beta_width", beta_width},
          {"boundary_potentials", boundary_potentials},
          {"dropout", dropout},
          {"dropout_placement", placement_name(dropout_placement)},
          {"normalize_features", normalize_features},
          {"constrained_decoding", constrained_decoding},
          {"objective", objective_name(objective)},
          {"batch_size", batch_size},
          {"max_length", max_length},
          {"folds", folds},
          {"validation_fraction", validation_fraction},
          {"patience", patience},
          {"max_epochs", max_epochs},
          {"seed", seed},
          {"learning_rate", optimizer.learning_rate},
          {"momentum", optimizer.momentum},
          {"epsilon", optimizer.epsilon},
          {"clip_norm", clip_norm},
          {"pretrained_embeddings", pretrained_embeddings}};
}

ModelOptions ExperimentConfig::model_options() const {
  ModelOptions o;
  const bool emb = dropout_placement == DropoutPlacement::kBoth || dropout_placement == DropoutPlacement::kEmbedding;
  const bool feat = dropout_placement == DropoutPlacement::kBoth || dropout_placement == DropoutPlacement::kFeatures;
  o.embedding_dropout = emb ? dropout : 0.0;
  o.feature_dropout = feat ? dropout : 0.0;
  o.normalize_features = normalize_features;
  o.constrained_decoding = constrained_decoding;
  o.objective = objective;
  return o;
}

BudgetResolution ExperimentConfig::resolve_dims(ModelKind kind, std::size_t vocab, std::size_t labels) const {
  ModelDims d;
  d.vocab = vocab;
  d.embedding = embedding_dim;
  d.unary_width = unary_width;
  d.pairwise_width = pairwise_width;
  d.beta_width = beta_width;
  d.boundary_potentials = boundary_potentials;
  if (hidden_size == 0) return resolve_hidden_size(kind, vocab, d, labels, budget_target);
  d.hidden = hidden_size;
  BudgetResolution r;
  r.dims = d;
  r.count = parameter_count(kind, d, labels);
  r.relative_deviation = (static_cast<double>(r.count) - budget_target) / budget_target;
  r.within_budget = std::abs(r.relative_deviation) <= kBudgetTolerance;
  return r;
}

}  // namespace seqcrf
