#pragma once

#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "seqcrf/corpus.hpp"
#include "seqcrf/model.hpp"

// File layout: 8 magic bytes "SEQCRF01", a little-endian u64 manifest length,
// the JSON manifest (format version, model description, vocabulary, array
// names/shapes/offsets, experiment config), then every array as raw
// little-endian IEEE-754 binary32 values in manifest order.
namespace seqcrf {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::unique_ptr<SequenceModel<float>> model;
  Vocabulary vocab;
  nlohmann::json config;  // experiment config recorded at save time (may be null)
};

void write_checkpoint(std::ostream& out, SequenceModel<float>& model, const Vocabulary& vocab,
                      const nlohmann::json& config = nullptr);
Checkpoint read_checkpoint(std::istream& in, std::string_view source = "<stream>");

void checkpoint_save(const std::string& path, SequenceModel<float>& model, const Vocabulary& vocab,
                     const nlohmann::json& config = nullptr);
Checkpoint checkpoint_load(const std::string& path);

}  // namespace seqcrf
