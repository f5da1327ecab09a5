#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "seqcrf/corpus.hpp"
#include "seqcrf/eval.hpp"

namespace fs = std::filesystem;
using namespace seqcrf;

namespace {

struct Run {
  int status = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(SEQCRF_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Scratch directory holding a small generated corpus and a quick config.
struct Workspace {
  fs::path dir;

  Workspace() {
    dir = fs::temp_directory_path() / ("seqcrf-cli-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto gen = cli("gen-synthetic --seed 4 --size 90 --out " + (dir / "corpus.tsv").string());
    REQUIRE(gen.status == 0);
    std::ofstream(dir / "quick.json") << R"({"models":["baseline","crf"],"embedding_dim":8,"hidden_size":8,)"
                                         R"("budget_mode":false,"max_epochs":2,"folds":3,"seed":3})";
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string path(const std::string& name) const { return (dir / name).string(); }
};

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("missing corpus exits nonzero and names the path") {
  const auto r = cli("train --corpus /no/such/corpus.tsv --out /tmp/x.ckpt");
  CHECK(r.status != 0);
  CHECK(r.output.find("/no/such/corpus.tsv") != std::string::npos);
}

TEST_CASE("unknown flags and subcommands are rejected") {
  CHECK(cli("train --corpus a.tsv --out b --bogus 1").status != 0);
  CHECK(cli("frobnicate").status != 0);
  CHECK(cli("").status != 0);
}

TEST_CASE("crossval writes one report per fold and a summary") {
  Workspace ws;
  const auto r = cli("crossval --config " + ws.path("quick.json") + " --corpus " + ws.path("corpus.tsv") + " --out " +
                     ws.path("cv"));
  INFO(r.output);
  REQUIRE(r.status == 0);
  CHECK(r.output.find("resolved config: {") != std::string::npos);
  for (int k = 1; k <= 3; ++k) CHECK(fs::exists(ws.dir / "cv" / ("fold-" + std::to_string(k) + ".json")));
  CHECK_FALSE(fs::exists(ws.dir / "cv" / "fold-4.json"));
  CHECK(fs::exists(ws.dir / "cv" / "summary.txt"));

  const auto summary = nlohmann::json::parse(slurp(ws.dir / "cv" / "summary.json"));
  CHECK(summary.at("ttests").size() == 1);
  CHECK(summary.at("ttests")[0].at("a") == "baseline");
  CHECK(summary.at("ttests")[0].at("b") == "crf");

  for (const std::string model : {"baseline", "crf"}) {
    MetricReport pooled;
    std::vector<double> f1;
    for (int k = 1; k <= 3; ++k) {
      const auto fold = nlohmann::json::parse(slurp(ws.dir / "cv" / ("fold-" + std::to_string(k) + ".json")));
      const auto report = MetricReport::from_json(fold.at("models").at(model).at("report"));
      pooled += report;
      f1.push_back(report.strict_micro().f1());
    }
    const auto stated = MetricReport::from_json(summary.at("models").at(model).at("micro"));
    CHECK(stated.strict == pooled.strict);
    CHECK(stated.relaxed == pooled.relaxed);
    CHECK(summary.at("models").at(model).at("fold_strict_f1").get<std::vector<double>>() == f1);
  }

  SUBCASE("a second run is byte-identical") {
    const auto again = cli("crossval --config " + ws.path("quick.json") + " --corpus " + ws.path("corpus.tsv") +
                           " --out " + ws.path("cv2"));
    REQUIRE(again.status == 0);
    for (const std::string f : {"fold-1.json", "fold-2.json", "fold-3.json", "summary.json", "summary.txt"})
      CHECK(slurp(ws.dir / "cv" / f) == slurp(ws.dir / "cv2" / f));
  }
}

TEST_CASE("flags override the config file") {
  Workspace ws;
  const auto r = cli("crossval --config " + ws.path("quick.json") + " --corpus " + ws.path("corpus.tsv") +
                     " --model skipchain --folds 2 --seed 8 --out " + ws.path("cv"));
  INFO(r.output);
  REQUIRE(r.status == 0);
  CHECK(r.output.find("\"models\":[\"skipchain\"]") != std::string::npos);
  CHECK(r.output.find("\"folds\":2") != std::string::npos);
  CHECK(r.output.find("\"seed\":8") != std::string::npos);
  CHECK(fs::exists(ws.dir / "cv" / "fold-2.json"));
  CHECK_FALSE(fs::exists(ws.dir / "cv" / "fold-3.json"));
}

TEST_CASE("train, predict and evaluate form a pipeline") {
  Workspace ws;
  const std::string train_args =
      "train --config " + ws.path("quick.json") + " --corpus " + ws.path("corpus.tsv") + " --model crf-pair --out ";
  const auto a = cli(train_args + ws.path("a.ckpt"));
  INFO(a.output);
  REQUIRE(a.status == 0);
  CHECK(a.output.find("resolved config: {") != std::string::npos);
  CHECK(a.output.find("\"model\":\"crf-pair\"") != std::string::npos);
  REQUIRE(cli(train_args + ws.path("b.ckpt")).status == 0);
  CHECK(slurp(ws.dir / "a.ckpt.history.json") == slurp(ws.dir / "b.ckpt.history.json"));
  CHECK(slurp(ws.dir / "a.ckpt") == slurp(ws.dir / "b.ckpt"));
  const auto history = nlohmann::json::parse(slurp(ws.dir / "a.ckpt.history.json"));
  REQUIRE(history.at("epochs").size() == 2);
  CHECK(history.at("epochs")[1].at("train_loss") < history.at("epochs")[0].at("train_loss"));

  const auto p = cli("predict --checkpoint " + ws.path("a.ckpt") + " --corpus " + ws.path("corpus.tsv") + " --out " +
                     ws.path("pred.tsv"));
  INFO(p.output);
  REQUIRE(p.status == 0);
  const auto gold = load_corpus(ws.path("corpus.tsv"));
  const auto pred = load_corpus(ws.path("pred.tsv"));
  CHECK(pred.sentence_count() == gold.sentence_count());

  const auto e = cli("evaluate --gold " + ws.path("corpus.tsv") + " --pred " + ws.path("pred.tsv") + " --out " +
                     ws.path("eval.json"));
  REQUIRE(e.status == 0);
  CHECK(e.output.find("Drugname") != std::string::npos);
  std::vector<SentencePrediction> rows;
  const auto gs = all_sentences(gold), ps = all_sentences(pred);
  for (std::size_t i = 0; i < gs.size(); ++i) rows.push_back({gs[i]->tokens.size(), gs[i]->spans, ps[i]->spans});
  const auto written = MetricReport::from_json(nlohmann::json::parse(slurp(ws.dir / "eval.json")));
  CHECK(written.strict == evaluate(rows).strict);

  const auto self = cli("evaluate --gold " + ws.path("corpus.tsv") + " --pred " + ws.path("corpus.tsv"));
  REQUIRE(self.status == 0);
}

TEST_CASE("generator output is deterministic") {
  Workspace ws;
  REQUIRE(cli("gen-synthetic --seed 9 --size 40 --out " + ws.path("x.tsv")).status == 0);
  REQUIRE(cli("gen-synthetic --seed 9 --size 40 --out " + ws.path("y.tsv")).status == 0);
  CHECK(slurp(ws.dir / "x.tsv") == slurp(ws.dir / "y.tsv"));
  CHECK(load_corpus(ws.path("x.tsv")).sentence_count() == 40);
}

TEST_CASE("selftest reports counts per suite") {
  const auto r = cli("selftest --seed 2");
  INFO(r.output);
  CHECK(r.status == 0);
  CHECK(r.output.find("1000 cases") != std::string::npos);
  CHECK(r.output.find("selftest passed") != std::string::npos);
}

}  // TEST_SUITE
