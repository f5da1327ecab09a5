#include "seqcrf/synth.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace seqcrf {

namespace {

struct Node {
  enum class Kind { kWord, kSlot, kEffect, kCause, kGroup } kind = Kind::kWord;
  std::string word;
  Category category = Category::kADE;
  std::vector<Node> children;
};

struct Template {
  std::vector<Node> nodes;
  std::array<bool, kNumCategories> produces{};
};

Category slot_category(const std::string& token, const std::string& text) {
  const std::string name = token.substr(1, token.size() - 2);
  auto cat = parse_category(name);
  if (!cat) throw std::invalid_argument("template '" + text + "': unknown category '" + name + "'");
  return *cat;
}

Template parse_template(const std::string& text) {
  Template out;
  std::vector<Node>* target = &out.nodes;
  bool in_group = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto start = text.find_first_not_of(' ', pos);
    if (start == std::string::npos) break;
    auto stop = text.find(' ', start);
    if (stop == std::string::npos) stop = text.size();
    const std::string tok = text.substr(start, stop - start);
    pos = stop;
    auto mark = [&](Category c) { out.produces[static_cast<std::size_t>(c)] = true; };
    if (tok == "[") {
      if (in_group) throw std::invalid_argument("template '" + text + "': nested optional group");
      out.nodes.push_back({Node::Kind::kGroup, {}, Category::kADE, {}});
      target = &out.nodes.back().children;
      in_group = true;
    } else if (tok == "]") {
      if (!in_group) throw std::invalid_argument("template '" + text + "': unbalanced ']'");
      target = &out.nodes;
      in_group = false;
    } else if (tok == "{Effect}") {
      target->push_back({Node::Kind::kEffect, {}, Category::kADE, {}});
      mark(Category::kADE);
      mark(Category::kIndication);
    } else if (tok == "{Cause}") {
      // Chosen for the effect it licenses, never to supply its own category.
      target->push_back({Node::Kind::kCause, {}, Category::kDrugname, {}});
    } else if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}') {
      const Category c = slot_category(tok, text);
      target->push_back({Node::Kind::kSlot, {}, c, {}});
      mark(c);
    } else {
      target->push_back({Node::Kind::kWord, tok, Category::kADE, {}});
    }
  }
  if (in_group) throw std::invalid_argument("template '" + text + "': unterminated optional group");
  if (out.nodes.empty()) throw std::invalid_argument("empty template");
  bool effect = false, cause = false;
  auto scan = [&](const std::vector<Node>& nodes, auto&& self) -> void {
    for (const auto& n : nodes) {
      effect |= n.kind == Node::Kind::kEffect;
      cause |= n.kind == Node::Kind::kCause;
      if (n.kind == Node::Kind::kGroup) self(n.children, self);
    }
  };
  scan(out.nodes, scan);
  if (effect != cause) throw std::invalid_argument("template '" + text + "': {Effect} and {Cause} must appear together");
  return out;
}

class Generator {
 public:
  Generator(std::uint64_t seed, const SynthConfig& cfg) : cfg_(cfg), rng_(seed) {
    if (cfg.templates.empty()) throw std::invalid_argument("synthetic generator needs at least one template");
    for (const auto& t : cfg.templates) templates_.push_back(parse_template(t));
    double total = 0;
    for (const auto& [c, w] : cfg.category_weights) {
      if (w < 0) throw std::invalid_argument("negative category weight");
      total += w;
    }
    if (total <= 0) throw std::invalid_argument("category weights must not all be zero");
    for (const auto& [c, w] : cfg.category_weights) ratio_[static_cast<std::size_t>(c)] = w / total;
    for (Category c : kAllCategories) {
      const auto& p = pool(c);
      if (p.empty()) throw std::invalid_argument("no vocabulary for category " + std::string(category_name(c)));
      auto& toks = phrases_[static_cast<std::size_t>(c)];
      for (const auto& phrase : p) {
        toks.push_back(tokenize(phrase));
        if (toks.back().empty()) throw std::invalid_argument("empty phrase in pool for " + std::string(category_name(c)));
      }
    }
  }

  Sentence sentence() {
    const Category focus = most_needed();
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < templates_.size(); ++i)
      if (templates_[i].produces[static_cast<std::size_t>(focus)]) candidates.push_back(i);
    if (candidates.empty()) {
      for (std::size_t i = 0; i < templates_.size(); ++i) candidates.push_back(i);
    }
    const Template& tpl = templates_[candidates[pick(candidates.size())]];

    if (focus == Category::kADE) {
      effect_ = Category::kADE;
    } else if (focus == Category::kIndication) {
      effect_ = Category::kIndication;
    } else {
      effect_ = deficit(Category::kADE) >= deficit(Category::kIndication) ? Category::kADE : Category::kIndication;
    }
    cause_ = effect_ == Category::kADE ? Category::kDrugname : Category::kOtherSSD;

    Sentence s;
    emit(tpl.nodes, s);
    return s;
  }

 private:
  const std::vector<std::string>& pool(Category c) const {
    const auto own = cfg_.vocabulary.find(std::string(category_name(c)));
    if (own != cfg_.vocabulary.end()) return own->second;
    if (c == Category::kADE || c == Category::kIndication || c == Category::kOtherSSD) {
      const auto shared = cfg_.vocabulary.find("SSD");
      if (shared != cfg_.vocabulary.end()) return shared->second;
    }
    static const std::vector<std::string> none;
    return none;
  }

  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(rng_() % n); }
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  double deficit(Category c) const {
    const auto i = static_cast<std::size_t>(c);
    return ratio_[i] * static_cast<double>(total_ + 1) - static_cast<double>(count_[i]);
  }

  Category most_needed() const {
    Category best = kAllCategories[0];
    for (Category c : kAllCategories)
      if (deficit(c) > deficit(best)) best = c;
    return best;
  }

  // One-off name such as "dravelimab" or "torsunosis syndrome"; almost never
  // repeats, so held-out text sees it as an unknown token.
  std::vector<std::string> rare_name(Category c) {
    static constexpr std::array<const char*, 12> kSyllables = {"dra", "ve", "li", "tor", "sun", "ka",
                                                                "mo", "rex", "pa", "zin", "qui", "lo"};
    static constexpr std::array<const char*, 6> kDrugSuffix = {"mab", "nib", "pril", "olol", "cillin", "azole"};
    static constexpr std::array<const char*, 6> kConditionSuffix = {"itis", "osis", "emia", "algia", "opathy", "oma"};
    std::string word;
    const std::size_t syllables = 2 + pick(3);
    for (std::size_t i = 0; i < syllables; ++i) word += kSyllables[pick(kSyllables.size())];
    if (c == Category::kDrugname) return {word + kDrugSuffix[pick(kDrugSuffix.size())]};
    word += kConditionSuffix[pick(kConditionSuffix.size())];
    if (uniform() < 0.3) return {word, "syndrome"};
    return {word};
  }

  void phrase(Category c, Sentence& s) {
    const auto& options = phrases_[static_cast<std::size_t>(c)];
    const bool rare_capable = c == Category::kDrugname || c == Category::kADE || c == Category::kIndication ||
                              c == Category::kOtherSSD;
    std::vector<std::string> rare;
    if (rare_capable && cfg_.rare_rate > 0 && uniform() < cfg_.rare_rate) rare = rare_name(c);
    const auto& toks = rare.empty() ? options[pick(options.size())] : rare;
    const int start = static_cast<int>(s.tokens.size());
    s.tokens.insert(s.tokens.end(), toks.begin(), toks.end());
    s.spans.push_back({start, static_cast<int>(s.tokens.size()) - 1, c});
    ++count_[static_cast<std::size_t>(c)];
    ++total_;
  }

  std::optional<Category> first_category(const std::vector<Node>& nodes) const {
    for (const auto& n : nodes) {
      if (n.kind == Node::Kind::kSlot) return n.category;
      if (n.kind == Node::Kind::kEffect) return effect_;
      if (n.kind == Node::Kind::kCause) return cause_;
    }
    return std::nullopt;
  }

  void emit(const std::vector<Node>& nodes, Sentence& s) {
    for (const auto& n : nodes) {
      switch (n.kind) {
        case Node::Kind::kWord: {
          auto toks = tokenize(n.word);
          s.tokens.insert(s.tokens.end(), toks.begin(), toks.end());
          break;
        }
        case Node::Kind::kSlot: phrase(n.category, s); break;
        case Node::Kind::kEffect: phrase(effect_, s); break;
        case Node::Kind::kCause: phrase(cause_, s); break;
        case Node::Kind::kGroup: {
          const auto c = first_category(n.children);
          const double keep = !c ? 0.5 : (deficit(*c) > 0 ? 0.8 : 0.05);
          if (uniform() < keep) emit(n.children, s);
          break;
        }
      }
    }
  }

  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  std::vector<Template> templates_;
  std::array<double, kNumCategories> ratio_{};
  std::array<std::vector<std::vector<std::string>>, kNumCategories> phrases_;
  std::array<std::size_t, kNumCategories> count_{};
  std::size_t total_ = 0;
  Category effect_ = Category::kADE;
  Category cause_ = Category::kDrugname;
};

}  // namespace

SynthConfig SynthConfig::defaults() {
  SynthConfig c;
  c.category_weights = {
      {Category::kADE, 1807},      {Category::kIndication, 3724}, {Category::kOtherSSD, 40984},
      {Category::kSeverity, 3628}, {Category::kDrugname, 17008},  {Category::kDuration, 926},
      {Category::kDosage, 5978},   {Category::kRoute, 2862},      {Category::kFrequency, 5050},
  };
  c.templates = {
      // long-range: the category of the first phrase is fixed by the cause
      "the patient exhibited {Effect} secondary to the {Cause} .",
      "{Effect} , most likely secondary to {Cause} .",
      "she developed [ {Severity} ] {Effect} which is secondary to her {Cause} .",
      "{Effect} was noted and is thought to be secondary to recent {Cause} .",
      "he presented with {Effect} , felt to be secondary to {Cause} .",
      // history and review of systems
      "past medical history significant for {Other_SSD} [ and {Other_SSD} ] .",
      "patient denies {Other_SSD} [ or {Other_SSD} ] .",
      "she reports [ {Severity} ] {Other_SSD} since the last visit .",
      "no evidence of {Other_SSD} on exam today .",
      "family history of {Other_SSD} [ and {Other_SSD} ] .",
      "he was admitted with [ {Severity} ] {Other_SSD} and {Other_SSD} .",
      "assessment : [ {Severity} ] {Other_SSD} , stable .",
      "complains of [ {Severity} ] {Other_SSD} for several days .",
      "{Other_SSD} improved , [ {Severity} ] {Other_SSD} persists .",
      // medications
      "continue {Drugname} [ {Dosage} ] [ {Route} ] [ {Frequency} ] [ for {Duration} ] .",
      "started on {Drugname} {Dosage} [ {Frequency} ] .",
      "{Drugname} [ {Dosage} ] was given [ {Route} ] in clinic .",
      "discharged on {Drugname} [ {Frequency} ] [ for {Duration} ] .",
      "take {Drugname} [ {Dosage} ] [ {Route} ] [ {Frequency} ] .",
      "she was switched from {Drugname} to {Drugname} [ {Dosage} ] .",
      "increase {Drugname} to {Dosage} [ {Frequency} ] .",
      "{Drugname} {Route} {Frequency} [ for {Duration} ] .",
      // filler
      "follow up in clinic as scheduled .",
      "labs were reviewed with the patient .",
  };
  c.vocabulary = {
      {"SSD",
       {"rash", "nausea", "hairy cell leukemia", "deep vein thrombosis", "acute kidney injury",
        "chest pain", "shortness of breath", "atrial fibrillation", "hypertension", "type 2 diabetes",
        "peripheral neuropathy", "headache", "pneumonia", "low back pain", "anemia",
        "thrombocytopenia", "renal failure", "heart failure", "diarrhea", "fatigue", "psoriasis",
        "rheumatoid arthritis", "hair loss", "dizziness", "urinary tract infection",
        "elevated liver enzymes", "gi bleeding", "neutropenic fever", "skin ulcer", "hyperkalemia",
        "myalgia", "abdominal pain", "congestive heart failure", "chronic obstructive pulmonary disease",
        "mouth sores", "blurred vision", "weight loss", "insomnia", "lower extremity edema",
        "bone pain", "cough", "anxiety"}},
      {"Severity",
       {"mild", "severe", "moderate", "significant", "worsening", "not terribly", "very rare",
        "small area", "marked", "slight", "intermittent", "grade 3", "mild to moderate", "acute"}},
      {"Drugname",
       {"warfarin", "aspirin", "metformin", "lisinopril", "vincristine", "cladribine", "methotrexate",
        "prednisone", "heparin", "insulin glargine", "amoxicillin", "rituximab", "furosemide",
        "atorvastatin", "gabapentin", "ondansetron", "vancomycin", "coumadin", "chemotherapy",
        "radiation therapy", "tamoxifen", "omeprazole", "metoprolol", "allopurinol"}},
      {"Duration",
       {"7 days", "two weeks", "3 months", "one year", "10 days", "6 weeks", "the next month", "5 days",
        "a week", "indefinitely", "four weeks", "2 months"}},
      {"Dosage",
       {"5 mg", "81 mg", "500 mg", "10 units", "1 tablet", "2 puffs", "0.5 mg", "40 mg", "1 g",
        "20 mg", "two tablets", "100 mcg"}},
      {"Route",
       {"oral", "iv", "by mouth", "topical", "subcutaneous", "intravenously", "orally", "inhaled",
        "po", "im", "p.o."}},
      {"Frequency",
       {"daily", "twice a day", "every 6 hours", "once daily", "b.i.d.", "at bedtime", "every other day",
        "as needed", "weekly", "three times daily", "q 8 h", "every morning"}},
  };
  return c;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c = defaults();
  if (!j.is_object()) throw std::invalid_argument("generator config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") {
      c.seed = value.get<std::uint64_t>();
    } else if (key == "sentences_per_document") {
      c.sentences_per_document = value.get<std::size_t>();
      if (c.sentences_per_document == 0) throw std::invalid_argument("sentences_per_document must be positive");
    } else if (key == "category_weights") {
      c.category_weights.clear();
      for (const auto& [name, w] : value.items()) {
        auto cat = parse_category(name);
        if (!cat) throw std::invalid_argument("unknown category '" + name + "' in category_weights");
        c.category_weights[*cat] = w.get<double>();
      }
    } else if (key == "rare_rate") {
      c.rare_rate = value.get<double>();
      if (!(c.rare_rate >= 0 && c.rare_rate <= 1)) throw std::invalid_argument("rare_rate must lie in [0, 1]");
    } else if (key == "templates") {
      c.templates = value.get<std::vector<std::string>>();
    } else if (key == "vocabulary") {
      c.vocabulary = value.get<std::map<std::string, std::vector<std::string>>>();
    } else {
      throw std::invalid_argument("unknown generator config key '" + key + "'");
    }
  }
  for (const auto& t : c.templates) parse_template(t);
  return c;
}

nlohmann::json SynthConfig::to_json() const {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [cat, w] : category_weights) weights[std::string(category_name(cat))] = w;
  return {{"seed", seed},
          {"sentences_per_document", sentences_per_document},
          {"category_weights", weights},
          {"rare_rate", rare_rate},
          {"templates", templates},
          {"vocabulary", vocabulary}};
}

Corpus synth_generate(std::uint64_t seed, std::size_t size, const SynthConfig& config) {
  if (size == 0) throw std::invalid_argument("synthetic corpus size must be at least 1 sentence");
  Generator gen(seed, config);
  Corpus corpus;
  const std::size_t per_doc = std::max<std::size_t>(1, config.sentences_per_document);
  for (std::size_t i = 0; i < size; ++i) {
    if (i % per_doc == 0) {
      char id[32];
      std::snprintf(id, sizeof id, "synth-%05zu", i / per_doc + 1);
      corpus.documents.push_back({id, {}});
    }
    corpus.documents.back().sentences.push_back(gen.sentence());
  }
  return corpus;
}

}  // namespace seqcrf
