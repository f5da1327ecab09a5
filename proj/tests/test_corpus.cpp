#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "seqcrf/corpus.hpp"
#include "seqcrf/synth.hpp"

using namespace seqcrf;

namespace {

using Tokens = std::vector<std::string>;

Sentence sentence_of(std::size_t length, std::vector<Span> spans = {}) {
  Sentence s;
  for (std::size_t i = 0; i < length; ++i) s.tokens.push_back("w" + std::to_string(i));
  s.spans = std::move(spans);
  return s;
}

std::vector<const Sentence*> pointers(const std::vector<Sentence>& v) {
  std::vector<const Sentence*> out;
  for (const auto& s : v) out.push_back(&s);
  return out;
}

std::string serialise(const Corpus& c) {
  std::ostringstream out;
  write_corpus(out, c);
  return out.str();
}

std::map<Category, double> category_shares(const Corpus& c) {
  std::map<Category, double> counts;
  double total = 0;
  for (const auto& d : c.documents)
    for (const auto& s : d.sentences)
      for (const auto& sp : s.spans) {
        counts[sp.category] += 1;
        total += 1;
      }
  for (auto& [cat, n] : counts) n /= total;
  return counts;
}

// Target incidence counts per category.
const std::map<Category, double> kTableCounts = {
    {Category::kADE, 1807},      {Category::kIndication, 3724}, {Category::kOtherSSD, 40984},
    {Category::kSeverity, 3628}, {Category::kDrugname, 17008},  {Category::kDuration, 926},
    {Category::kDosage, 5978},   {Category::kRoute, 2862},      {Category::kFrequency, 5050},
};

void check_ratios(const Corpus& c, double tolerance) {
  double total = 0;
  for (const auto& [cat, n] : kTableCounts) total += n;
  CHECK(total == 81967);
  const auto shares = category_shares(c);
  for (const auto& [cat, n] : kTableCounts) {
    const double target = n / total;
    const double got = shares.contains(cat) ? shares.at(cat) : 0.0;
    INFO(category_name(cat) << " share " << got << " target " << target);
    CHECK(std::abs(got / target - 1.0) <= tolerance);
  }
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("tokenizer isolates punctuation") {
  CHECK(tokenize("p.o., daily") == Tokens{"p", ".", "o", ".", ",", "daily"});
  CHECK(tokenize("hairy cell leukemia") == Tokens{"hairy", "cell", "leukemia"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("  \t ").empty());
  CHECK(tokenize("Warfarin 5mg") == Tokens{"Warfarin", "5mg"});
  CHECK(lowercase("Warfarin") == "warfarin");
}

TEST_CASE("encode writes B then I labels") {
  const LabelSpace space;
  const std::vector<Span> spans{{0, 2, Category::kIndication}};
  const auto labels = bio_encode(spans, 4, space);
  std::vector<std::string> names;
  for (int y : labels) names.push_back(space.name(y));
  CHECK(names == Tokens{"B-Indication", "I-Indication", "I-Indication", "O"});
}

TEST_CASE("stray inside label opens a span") {
  const LabelSpace space;
  const std::vector<int> labels{space.outside(), space.inside(Category::kADE)};
  CHECK(bio_decode(labels, space) == std::vector<Span>{{1, 1, Category::kADE}});
  const std::vector<int> switched{space.begin(Category::kDrugname), space.inside(Category::kDosage)};
  CHECK(bio_decode(switched, space) ==
        std::vector<Span>{{0, 0, Category::kDrugname}, {1, 1, Category::kDosage}});
}

TEST_CASE("codec round trip on random span sets") {
  const LabelSpace space;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t length = 1 + static_cast<std::size_t>(i % 30);
    const auto spans = oracle::random_spans(rng, length);
    CHECK(bio_decode(bio_encode(spans, length, space), space) == spans);
  }
}

TEST_CASE("overlapping or out-of-range spans are rejected") {
  const LabelSpace space;
  const std::vector<Span> overlap{{0, 2, Category::kADE}, {2, 3, Category::kRoute}};
  CHECK_THROWS_AS(bio_encode(overlap, 5, space), std::invalid_argument);
  const std::vector<Span> outside{{3, 5, Category::kADE}};
  CHECK_THROWS_AS(bio_encode(outside, 5, space), std::invalid_argument);
}

TEST_CASE("two-sentence file parses into one document") {
  std::istringstream in("#doc d1\nstarted\tO\nwarfarin\tB-Drugname\n\nno\tO\nrash\tO\n");
  const auto c = parse_corpus(in);
  REQUIRE(c.documents.size() == 1);
  CHECK(c.documents[0].id == "d1");
  CHECK(c.sentence_count() == 2);
  CHECK(c.span_count() == 1);
  CHECK(c.documents[0].sentences[0].spans[0] == Span{1, 1, Category::kDrugname});
}

TEST_CASE("sentence count equals blank-line groups") {
  std::istringstream in("a\tO\n\n\nb\tO\nc\tO\n\nd\tO\n");
  const auto c = parse_corpus(in, "x.tsv");
  REQUIRE(c.documents.size() == 1);
  CHECK(c.documents[0].id == "x.tsv");
  CHECK(c.sentence_count() == 3);
}

TEST_CASE("unknown category is named in the error") {
  std::istringstream in("rash\tB-Bogus\n");
  try {
    parse_corpus(in);
    FAIL("no error");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("Bogus") != std::string::npos);
  }
}

TEST_CASE("malformed line is reported with its line number") {
  std::istringstream in("a\tO\nb\tO\nbroken line\n");
  try {
    parse_corpus(in, "f.tsv");
    FAIL("no error");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("f.tsv:3") != std::string::npos);
  }
}

TEST_CASE("missing corpus file is named in the error") {
  try {
    load_corpus("/nonexistent/corpus.tsv");
    FAIL("no error");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/corpus.tsv") != std::string::npos);
  }
}

TEST_CASE("written corpus parses back unchanged") {
  const auto c = synth_generate(3, 200);
  std::istringstream in(serialise(c));
  const auto back = parse_corpus(in);
  CHECK(serialise(back) == serialise(c));
  CHECK(back.span_count() == c.span_count());
}

TEST_CASE("vocabulary is lowercased with unknown at zero") {
  std::vector<Sentence> v{sentence_of(0)};
  v[0].tokens = {"Warfarin", "daily", "warfarin"};
  const auto ptrs = pointers(v);
  const auto vocab = Vocabulary::build(ptrs);
  CHECK(vocab.size() == 3);
  CHECK(vocab.index("WARFARIN") == vocab.index("warfarin"));
  CHECK(vocab.index("warfarin") != Vocabulary::kUnknown);
  CHECK(vocab.index("aspirin") == Vocabulary::kUnknown);
}

TEST_CASE("batches of 64 with a short tail") {
  std::vector<Sentence> v(130, sentence_of(5));
  const auto ptrs = pointers(v);
  const auto vocab = Vocabulary::build(ptrs);
  const auto batches = make_batches(ptrs, vocab, LabelSpace());
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].rows == 64);
  CHECK(batches[1].rows == 64);
  CHECK(batches[2].rows == 2);
}

TEST_CASE("long sentences are cropped to fifty tokens") {
  std::vector<Sentence> v{sentence_of(53, {{10, 12, Category::kADE}, {49, 51, Category::kRoute}, {51, 52, Category::kDosage}})};
  const auto ptrs = pointers(v);
  const auto vocab = Vocabulary::build(ptrs);
  const auto b = make_batches(ptrs, vocab, LabelSpace()).at(0);
  CHECK(b.lengths[0] == 50);
  CHECK(b.original_lengths[0] == 53);
  for (std::size_t t = 0; t < 50; ++t) CHECK(b.tokens[t] == vocab.index("w" + std::to_string(t)));
  const auto kept = crop_spans(v[0].spans, 50);
  CHECK(kept == std::vector<Span>{{10, 12, Category::kADE}});
}

TEST_CASE("short sentences are pre-padded") {
  std::vector<Sentence> v{sentence_of(10, {{0, 1, Category::kDrugname}})};
  const auto ptrs = pointers(v);
  const auto vocab = Vocabulary::build(ptrs);
  const LabelSpace space;
  const auto b = make_batches(ptrs, vocab, space).at(0);
  for (std::size_t t = 0; t < 50; ++t) CHECK(b.mask[t] == (t >= 40 ? 1 : 0));
  CHECK(b.offset(0) == 40);
  CHECK(b.tokens[39] == 0);
  CHECK(b.labels[39] == -1);
  CHECK(b.labels[40] == space.begin(Category::kDrugname));
  CHECK(b.labels[41] == space.inside(Category::kDrugname));
}

TEST_CASE("every batch keeps invalid positions as a row prefix") {
  const auto c = synth_generate(5, 600);
  const auto ptrs = all_sentences(c);
  const auto vocab = Vocabulary::build(ptrs);
  for (const auto& b : make_batches(ptrs, vocab, LabelSpace(), 64, 9)) {
    for (std::size_t r = 0; r < b.rows; ++r) {
      bool seen_valid = false;
      for (std::size_t t = 0; t < b.width; ++t) {
        const bool valid = b.mask[r * b.width + t] != 0;
        CHECK(!(seen_valid && !valid));
        seen_valid |= valid;
        if (valid) CHECK(static_cast<std::size_t>(b.tokens[r * b.width + t]) < vocab.size());
      }
    }
  }
}

TEST_CASE("shuffled batches are deterministic per seed") {
  const auto c = synth_generate(6, 300);
  const auto ptrs = all_sentences(c);
  const auto vocab = Vocabulary::build(ptrs);
  const auto a = make_batches(ptrs, vocab, LabelSpace(), 64, 42);
  const auto b = make_batches(ptrs, vocab, LabelSpace(), 64, 42);
  const auto other = make_batches(ptrs, vocab, LabelSpace(), 64, 43);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sentence_ids == b[i].sentence_ids);
    CHECK(a[i].tokens == b[i].tokens);
  }
  CHECK(a[0].sentence_ids != other[0].sentence_ids);
  std::vector<std::size_t> ids;
  for (const auto& batch : a) ids.insert(ids.end(), batch.sentence_ids.begin(), batch.sentence_ids.end());
  std::sort(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == i);
}

TEST_CASE("generator is byte-identical for a fixed seed") {
  CHECK(serialise(synth_generate(11, 500)) == serialise(synth_generate(11, 500)));
  CHECK(serialise(synth_generate(11, 500)) != serialise(synth_generate(12, 500)));
  CHECK(synth_generate(11, 500).sentence_count() == 500);
}

TEST_CASE("generator category shares follow the corpus statistics") {
  check_ratios(synth_generate(21, 2000), 0.20);
  check_ratios(synth_generate(22, 10000), 0.10);
}

TEST_CASE("generated Frequency spans have the target mean length") {
  const auto c = synth_generate(23, 2000);
  double sum = 0, n = 0;
  for (const auto& d : c.documents)
    for (const auto& s : d.sentences)
      for (const auto& sp : s.spans)
        if (sp.category == Category::kFrequency) {
          sum += sp.end - sp.start + 1;
          n += 1;
        }
  REQUIRE(n > 0);
  CHECK(std::abs(sum / n - 2.44) <= 0.5);
}

TEST_CASE("cause after secondary to fixes the category of the effect") {
  const auto c = synth_generate(24, 3000);
  std::size_t ade = 0, indication = 0;
  for (const auto& d : c.documents)
    for (const auto& s : d.sentences) {
      const auto it = std::find(s.tokens.begin(), s.tokens.end(), "secondary");
      if (it == s.tokens.end()) continue;
      const int at = static_cast<int>(it - s.tokens.begin());
      const Span* effect = nullptr;
      const Span* cause = nullptr;
      for (const auto& sp : s.spans) {
        if (sp.end < at && (sp.category == Category::kADE || sp.category == Category::kIndication)) effect = &sp;
        if (sp.start > at && cause == nullptr) cause = &sp;
      }
      REQUIRE(effect != nullptr);
      REQUIRE(cause != nullptr);
      CHECK(cause->start - effect->end >= 3);
      if (cause->category == Category::kDrugname) {
        CHECK(effect->category == Category::kADE);
        ++ade;
      } else {
        CHECK(cause->category == Category::kOtherSSD);
        CHECK(effect->category == Category::kIndication);
        ++indication;
      }
    }
  CHECK(ade > 0);
  CHECK(indication > 0);
}

TEST_CASE("the same phrase appears under several SSD categories") {
  const auto c = synth_generate(25, 3000);
  std::map<std::string, std::set<Category>> seen;
  for (const auto& d : c.documents)
    for (const auto& s : d.sentences)
      for (const auto& sp : s.spans) {
        if (sp.category != Category::kADE && sp.category != Category::kIndication && sp.category != Category::kOtherSSD)
          continue;
        std::string phrase;
        for (int t = sp.start; t <= sp.end; ++t) phrase += s.tokens[static_cast<std::size_t>(t)] + " ";
        seen[phrase].insert(sp.category);
      }
  CHECK(seen.at("rash ").size() == 3);
}

TEST_CASE("generator config round-trips through json and rejects unknown keys") {
  const auto d = SynthConfig::defaults();
  const auto back = SynthConfig::from_json(d.to_json());
  CHECK(back.to_json() == d.to_json());
  CHECK_THROWS(SynthConfig::from_json(nlohmann::json{{"colour", 1}}));
  CHECK_THROWS(SynthConfig::from_json(nlohmann::json{{"rare_rate", 1.5}}));
  auto plain = SynthConfig::defaults();
  plain.rare_rate = 0;
  const auto c = synth_generate(26, 300, plain);
  const auto& drugs = plain.vocabulary.at("Drugname");
  for (const auto& doc : c.documents)
    for (const auto& s : doc.sentences)
      for (const auto& sp : s.spans)
        if (sp.category == Category::kDrugname) {
          std::string phrase;
          for (int t = sp.start; t <= sp.end; ++t)
            phrase += (t > sp.start ? " " : "") + s.tokens[static_cast<std::size_t>(t)];
          CHECK(std::find(drugs.begin(), drugs.end(), phrase) != drugs.end());
        }
}

}  // TEST_SUITE
