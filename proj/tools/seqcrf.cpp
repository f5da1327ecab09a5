// Command-line entry point: train, predict, evaluate, crossval, gen-synthetic, selftest.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqcrf/checkpoint.hpp"
#include "seqcrf/config.hpp"
#include "seqcrf/corpus.hpp"
#include "seqcrf/crossval.hpp"
#include "seqcrf/eval.hpp"
#include "seqcrf/selftest.hpp"
#include "seqcrf/synth.hpp"
#include "seqcrf/trainer.hpp"

namespace {

using namespace seqcrf;

struct Flags {
  std::string config;
  std::string corpus;
  std::string out;
  std::string checkpoint;
  std::string gold;
  std::string pred;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> models;
  std::optional<std::size_t> folds;
  std::size_t size = 5000;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw std::invalid_argument(std::string("missing --") + what);
  if (!std::filesystem::exists(path)) throw std::invalid_argument(std::string(what) + " '" + path + "' does not exist");
}

ExperimentConfig experiment_config(const Flags& f) {
  ExperimentConfig c;
  if (!f.config.empty()) {
    require_file(f.config, "config");
    c = ExperimentConfig::load(f.config);
  }
  if (f.seed) c.seed = *f.seed;
  if (!f.models.empty()) {
    c.models.clear();
    for (const auto& m : f.models) {
      auto k = parse_model_kind(m);
      if (!k) throw std::invalid_argument("unknown model '" + m + "' (baseline, crf, crf-pair, skipchain)");
      c.models.push_back(*k);
    }
  }
  if (f.folds) c.folds = *f.folds;
  c.validate();
  return c;
}

void echo(const nlohmann::json& resolved) { std::cout << "resolved config: " << resolved.dump() << std::endl; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

int run_train(const Flags& f) {
  const ExperimentConfig config = experiment_config(f);
  require_file(f.corpus, "corpus");
  if (f.out.empty()) throw std::invalid_argument("missing --out (checkpoint path)");
  const Corpus corpus = load_corpus(f.corpus);
  const ModelKind kind = config.models.front();

  // Hold out the validation share of sentences, seeded like a fold split.
  std::vector<SentenceRef> refs;
  for (std::size_t d = 0; d < corpus.documents.size(); ++d)
    for (std::size_t s = 0; s < corpus.documents[d].sentences.size(); ++s) refs.push_back({d, s});
  std::mt19937_64 rng(derive_seed(config.seed, 7));
  for (std::size_t i = refs.size(); i > 1; --i) std::swap(refs[i - 1], refs[rng() % i]);
  std::size_t held = static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(refs.size())));
  if (held >= refs.size()) held = refs.size() > 0 ? refs.size() - 1 : 0;
  const std::vector<SentenceRef> val_refs(refs.begin(), refs.begin() + static_cast<std::ptrdiff_t>(held));
  const std::vector<SentenceRef> train_refs(refs.begin() + static_cast<std::ptrdiff_t>(held), refs.end());
  const auto training = resolve(corpus, train_refs);
  const auto validation = resolve(corpus, val_refs);

  nlohmann::json resolved = config.to_json();
  resolved["model"] = model_kind_name(kind);
  const auto preview = config.resolve_dims(kind, Vocabulary::build(training).size());
  resolved["resolved_hidden_size"] = preview.dims.hidden;
  resolved["resolved_beta_width"] = preview.dims.resolved_beta_width();
  resolved["parameters"] = preview.count;
  echo(resolved);

  TrainedModel tm = train(config, kind, training, validation, config.seed, &std::cerr);
  checkpoint_save(f.out, *tm.model, tm.vocab, resolved);
  write_text(f.out + ".history.json", tm.history.to_json().dump(2) + "\n");
  for (const auto& incident : tm.history.incidents) std::cerr << "note: " << incident << '\n';
  std::cout << "checkpoint written to " << f.out << " (best epoch " << tm.history.best_epoch << ", validation strict F1 "
            << tm.history.best_validation_f1 << ")\n";
  return 0;
}

int run_predict(const Flags& f) {
  require_file(f.checkpoint, "checkpoint");
  require_file(f.corpus, "corpus");
  if (f.out.empty()) throw std::invalid_argument("missing --out (prediction TSV path)");
  Checkpoint cp = checkpoint_load(f.checkpoint);
  std::size_t batch_size = 64, max_length = kMaxSentenceLength;
  if (cp.config.is_object()) {
    batch_size = cp.config.value("batch_size", batch_size);
    max_length = cp.config.value("max_length", max_length);
  }
  nlohmann::json resolved = {{"checkpoint", f.checkpoint}, {"model", cp.model->describe()},
                             {"batch_size", batch_size}, {"max_length", max_length}};
  echo(resolved);
  Corpus corpus = load_corpus(f.corpus);
  const auto sentences = all_sentences(corpus);
  const auto spans = predict_spans(*cp.model, cp.vocab, sentences, batch_size, max_length);
  std::size_t i = 0;
  for (auto& doc : corpus.documents)
    for (auto& s : doc.sentences) s.spans = spans[i++];
  save_corpus(f.out, corpus);
  std::cout << "predictions for " << sentences.size() << " sentences written to " << f.out << '\n';
  return 0;
}

int run_evaluate(const Flags& f) {
  require_file(f.gold, "gold");
  require_file(f.pred, "pred");
  echo({{"gold", f.gold}, {"pred", f.pred}, {"out", f.out}});
  const Corpus gold = load_corpus(f.gold);
  const Corpus pred = load_corpus(f.pred);
  const auto gs = all_sentences(gold), ps = all_sentences(pred);
  if (gs.size() != ps.size()) {
    throw std::invalid_argument("gold has " + std::to_string(gs.size()) + " sentences, prediction has " +
                                std::to_string(ps.size()));
  }
  std::vector<SentencePrediction> rows;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (gs[i]->tokens != ps[i]->tokens) {
      throw std::invalid_argument("sentence " + std::to_string(i + 1) + " has different tokens in gold and prediction");
    }
    rows.push_back({gs[i]->tokens.size(), gs[i]->spans, ps[i]->spans});
  }
  const MetricReport report = evaluate(rows);
  std::cout << format_report(report);
  if (!f.out.empty()) write_text(f.out, report.to_json().dump(2) + "\n");
  return 0;
}

int run_crossval_cmd(const Flags& f) {
  const ExperimentConfig config = experiment_config(f);
  require_file(f.corpus, "corpus");
  if (f.out.empty()) throw std::invalid_argument("missing --out (report directory)");
  echo(config.to_json());
  const Corpus corpus = load_corpus(f.corpus);
  CrossvalOptions options;
  options.log = &std::cerr;
  const CrossvalResult result = run_crossval(config, corpus, options);
  write_crossval(result, config, f.out);
  std::cout << result.summary_table();
  return 0;
}

int run_generate(const Flags& f) {
  if (f.out.empty()) throw std::invalid_argument("missing --out (corpus path)");
  SynthConfig config = SynthConfig::defaults();
  if (!f.config.empty()) {
    require_file(f.config, "config");
    std::ifstream in(f.config);
    config = SynthConfig::from_json(nlohmann::json::parse(in));
  }
  if (f.seed) config.seed = *f.seed;
  nlohmann::json resolved = config.to_json();
  resolved["size"] = f.size;
  echo(resolved);
  const Corpus corpus = synth_generate(config.seed, f.size, config);
  save_corpus(f.out, corpus);
  std::cout << corpus.sentence_count() << " sentences, " << corpus.documents.size() << " documents, "
            << corpus.span_count() << " spans written to " << f.out << '\n';
  return 0;
}

int run_selftest_cmd(const Flags& f) {
  SelftestOptions options;
  if (f.seed) options.seed = *f.seed;
  echo({{"seed", options.seed},
        {"oracle_cases", options.oracle_cases},
        {"gradient_seeds", options.gradient_seeds},
        {"normalization_seeds", options.normalization_seeds},
        {"direction_probes", options.direction_probes}});
  const SelftestReport report = run_selftest(options);
  std::cout << report.summary();
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural CRF sequence labelling toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "train one model and write a checkpoint");
  auto* predict = app.add_subcommand("predict", "label a corpus with a trained checkpoint");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predicted against gold corpus files");
  auto* crossval = app.add_subcommand("crossval", "k-fold cross-validation of the configured models");
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic annotated corpus");
  auto* selftest = app.add_subcommand("selftest", "run oracle, gradient and normalization suites");

  for (auto* cmd : {train, crossval}) {
    cmd->add_option("--config", f.config, "experiment config (JSON)");
    cmd->add_option("--corpus", f.corpus, "corpus TSV")->required();
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("--model", f.models, "baseline | crf | crf-pair | skipchain (repeatable)");
    cmd->add_option("--folds", f.folds, "number of folds");
  }
  train->add_option("--out", f.out, "checkpoint path")->required();
  crossval->add_option("--out", f.out, "report directory")->required();

  predict->add_option("--checkpoint", f.checkpoint, "checkpoint file")->required();
  predict->add_option("--corpus", f.corpus, "corpus TSV to label")->required();
  predict->add_option("--out", f.out, "output TSV")->required();

  evaluate_cmd->add_option("--gold", f.gold, "gold corpus TSV")->required();
  evaluate_cmd->add_option("--pred", f.pred, "predicted corpus TSV")->required();
  evaluate_cmd->add_option("--out", f.out, "JSON report path");

  gen->add_option("--out", f.out, "output corpus TSV")->required();
  gen->add_option("--seed", f.seed, "generator seed");
  gen->add_option("--size", f.size, "number of sentences")->check(CLI::PositiveNumber);
  gen->add_option("--config", f.config, "generator config (JSON)");

  selftest->add_option("--seed", f.seed, "case seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*train) return run_train(f);
    if (*predict) return run_predict(f);
    if (*evaluate_cmd) return run_evaluate(f);
    if (*crossval) return run_crossval_cmd(f);
    if (*gen) return run_generate(f);
    if (*selftest) return run_selftest_cmd(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
