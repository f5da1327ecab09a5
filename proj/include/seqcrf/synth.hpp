#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqcrf/corpus.hpp"

namespace seqcrf {

// Template-driven generator of clinical-style annotated sentences.
//
// Template syntax (whitespace separated):
//   word        literal, labelled O
//   {Cat}       a phrase from pool Cat, labelled Cat
//   [ ... ]     optional group, kept mostly when its first category is under target
//   {Effect}    an SSD phrase whose category is ADE when the sentence's {Cause}
//   {Cause}     is a Drugname and Indication when the cause is an Other_SSD
// ADE, Indication and Other_SSD draw from the shared "SSD" pool unless a pool
// with their own name exists.
// Drugname and SSD mentions are replaced by invented one-off names at
// `rare_rate`, so a held-out cause is often an unknown word and only its
// context tells a drug from a condition.
struct SynthConfig {
  std::uint64_t seed = 20160901;
  std::size_t sentences_per_document = 10;
  // Share of Drugname and SSD mentions replaced by a freshly invented name.
  double rare_rate = 0.1;
  std::map<Category, double> category_weights;
  std::vector<std::string> templates;
  std::map<std::string, std::vector<std::string>> vocabulary;

  static SynthConfig defaults();
  // Missing keys keep their defaults; unknown keys are rejected.
  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

Corpus synth_generate(std::uint64_t seed, std::size_t size, const SynthConfig& config = SynthConfig::defaults());

}  // namespace seqcrf
