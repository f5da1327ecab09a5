#include "seqcrf/crossval.hpp"

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>

#include <omp.h>

namespace seqcrf {

std::size_t fold_threads() {
  if (const char* env = std::getenv("SEQCRF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return static_cast<std::size_t>(std::max(1, omp_get_max_threads()));
}

std::vector<double> CrossvalResult::strict_f1(std::size_t model) const {
  std::vector<double> out;
  for (const auto& r : reports.at(model)) out.push_back(r.strict_micro().f1());
  return out;
}

nlohmann::json CrossvalResult::fold_json(std::size_t fold) const {
  nlohmann::json models_json = nlohmann::json::object();
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& b = budgets[m][fold];
    models_json[std::string(model_kind_name(models[m]))] = {
        {"report", reports[m][fold].to_json()},
        {"history", histories[m][fold].to_json()},
        {"hidden_size", b.dims.hidden},
        {"parameters", b.count}};
  }
  return {{"fold", fold + 1}, {"models", models_json}};
}

nlohmann::json CrossvalResult::summary_json(const ExperimentConfig& config) const {
  nlohmann::json per_model = nlohmann::json::object();
  for (std::size_t m = 0; m < models.size(); ++m) {
    per_model[std::string(model_kind_name(models[m]))] = {{"micro", summary[m].to_json()},
                                                          {"fold_strict_f1", strict_f1(m)}};
  }
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& c : comparisons) {
    tests.push_back({{"a", model_kind_name(c.a)},
                     {"b", model_kind_name(c.b)},
                     {"n", c.test.n},
                     {"mean_difference", c.test.mean_difference},
                     {"t", c.test.degenerate ? nlohmann::json(c.test.t > 0 ? "inf" : "-inf") : nlohmann::json(c.test.t)},
                     {"p", c.test.p},
                     {"degenerate", c.test.degenerate}});
  }
  return {{"folds", folds}, {"config", config.to_json()}, {"models", per_model}, {"ttests", tests}};
}

std::string CrossvalResult::summary_table() const {
  std::vector<std::pair<std::string, MetricReport>> rows;
  for (std::size_t m = 0; m < models.size(); ++m) rows.emplace_back(std::string(model_kind_name(models[m])), summary[m]);
  std::ostringstream out;
  out << "Cross-validated micro average over " << folds << " folds\n\n" << format_table(rows);
  if (!comparisons.empty()) {
    out << "\nPaired t-test on per-fold strict F-score\n";
    for (const auto& c : comparisons) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "%-10s vs %-10s  mean diff %+.4f  t %s  p %.4g%s\n",
                    std::string(model_kind_name(c.a)).c_str(), std::string(model_kind_name(c.b)).c_str(),
                    c.test.mean_difference,
                    c.test.degenerate ? (c.test.t > 0 ? "inf" : "-inf") : std::to_string(c.test.t).c_str(), c.test.p,
                    c.test.degenerate ? "  (constant differences)" : "");
      out << buf;
    }
  }
  return out.str();
}

CrossvalResult run_crossval(const ExperimentConfig& config, const Corpus& corpus, const CrossvalOptions& options) {
  config.validate();
  const auto folds = kfold_split(corpus, config.folds, config.validation_fraction, config.seed);
  CrossvalResult result;
  result.models = config.models;
  result.folds = folds.size();
  const std::size_t n_models = config.models.size();
  result.reports.assign(n_models, std::vector<MetricReport>(folds.size()));
  result.histories.assign(n_models, std::vector<TrainingHistory>(folds.size()));
  result.budgets.assign(n_models, std::vector<BudgetResolution>(folds.size()));

  const std::size_t jobs = folds.size() * n_models;
  const std::size_t threads = std::min(jobs, options.threads ? options.threads : fold_threads());
  std::vector<std::exception_ptr> errors(jobs);
  std::mutex log_mutex;

#pragma omp parallel for schedule(dynamic, 1) num_threads(static_cast<int>(threads))
  for (std::size_t job = 0; job < jobs; ++job) {
    const std::size_t f = job / n_models, m = job % n_models;
    try {
      const FoldAssignment& fa = folds[f];
      const auto training = resolve(corpus, fa.train_sentences);
      const auto validation = resolve(corpus, fa.validation_sentences);
      const auto test = document_sentences(corpus, fa.test_documents);
      TrainedModel tm = train(config, config.models[m], training, validation, derive_seed(config.seed, 1000 + f));
      MetricReport report = evaluate_model(*tm.model, tm.vocab, test, config.batch_size, config.max_length);
      report.fold = f + 1;
      result.reports[m][f] = report;
      result.histories[m][f] = std::move(tm.history);
      result.budgets[m][f] = tm.budget;
      if (options.log) {
        std::lock_guard lock(log_mutex);
        *options.log << "fold " << f + 1 << "/" << folds.size() << " " << model_kind_name(config.models[m])
                     << ": strict F1 " << report.strict_micro().f1() << ", relaxed F1 " << report.relaxed_micro().f1()
                     << " (" << result.histories[m][f].epochs.size() << " epochs)\n";
      }
    } catch (...) {
      errors[job] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  result.summary.assign(n_models, MetricReport{});
  for (std::size_t m = 0; m < n_models; ++m)
    for (const auto& r : result.reports[m]) result.summary[m] += r;
  for (auto& s : result.summary) s.fold.reset();
  for (std::size_t a = 0; a < n_models; ++a) {
    for (std::size_t b = a + 1; b < n_models; ++b) {
      const auto fa = result.strict_f1(a), fb = result.strict_f1(b);
      result.comparisons.push_back({config.models[a], config.models[b], paired_ttest(fa, fb)});
    }
  }
  return result;
}

void write_crossval(const CrossvalResult& result, const ExperimentConfig& config, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + (fs::path(out_dir) / name).string() + "'");
    out << text;
  };
  for (std::size_t f = 0; f < result.folds; ++f) {
    write("fold-" + std::to_string(f + 1) + ".json", result.fold_json(f).dump(2) + "\n");
  }
  write("summary.json", result.summary_json(config).dump(2) + "\n");
  write("summary.txt", result.summary_table());
}

}  // namespace seqcrf
