#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "seqcrf/array.hpp"
#include "seqcrf/labels.hpp"

namespace seqcrf {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Splits on whitespace and emits every non-alphanumeric character as its own
// token. Surface forms are kept; see lowercase() for vocabulary keys.
std::vector<std::string> tokenize(std::string_view text);
std::string lowercase(std::string_view token);

struct Sentence {
  std::vector<std::string> tokens;
  std::vector<Span> spans;  // sorted, non-overlapping
};

struct Document {
  std::string id;
  std::vector<Sentence> sentences;
};

struct Corpus {
  std::vector<Document> documents;

  std::size_t sentence_count() const;
  std::size_t span_count() const;
};

struct SpanAnnotation {
  std::string document;
  std::size_t sentence = 0;
  Span span;
};

std::vector<SpanAnnotation> annotations(const Corpus& corpus);

// Throws std::invalid_argument for spans outside [0, length) or overlapping spans.
std::vector<int> bio_encode(std::span<const Span> spans, std::size_t length, const LabelSpace& labels);
// An I-X that does not continue an open X span opens a new span.
std::vector<Span> bio_decode(std::span<const int> labels, const LabelSpace& space);

// "surface<TAB>label" per token, blank line between sentences, "#doc <id>" per
// document. Tokens before the first "#doc" line belong to a document named
// after the source.
Corpus parse_corpus(std::istream& in, std::string_view source = "<stream>");
Corpus load_corpus(const std::string& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const std::string& path, const Corpus& corpus);

// Lowercased token -> index. Index 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  static constexpr int kUnknown = 0;

  Vocabulary();
  void add(std::string_view token);
  int index(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary build(std::span<const Sentence* const> sentences);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

inline constexpr std::size_t kMaxSentenceLength = 50;

// A batch of sentences, each cropped to `width` tokens and pre-padded, so the
// valid positions of a row are its last `lengths[b]` columns.
struct SequenceBatch {
  std::size_t rows = 0;
  std::size_t width = kMaxSentenceLength;
  std::vector<int> tokens;          // rows x width, 0 at padding
  std::vector<int> labels;          // rows x width, -1 at padding
  std::vector<std::uint8_t> mask;   // rows x width
  std::vector<std::size_t> lengths;           // kept tokens per row
  std::vector<std::size_t> original_lengths;  // before cropping
  std::vector<std::size_t> sentence_ids;      // position in the input list

  std::size_t offset(std::size_t b) const { return width - lengths[b]; }
  std::size_t max_length() const;

  template <typename S>
  Array<S> mask_array() const;
  // Copy restricted to the last `w` columns (w >= max_length()).
  SequenceBatch cropped(std::size_t w) const;
};

// Spans of a sentence that survive cropping to `width` tokens.
std::vector<Span> crop_spans(std::span<const Span> spans, std::size_t width);

// Batches in input order, or in an order shuffled with `shuffle_seed`.
std::vector<SequenceBatch> make_batches(std::span<const Sentence* const> sentences,
                                        const Vocabulary& vocab, const LabelSpace& labels,
                                        std::size_t batch_size = 64,
                                        std::optional<std::uint64_t> shuffle_seed = std::nullopt,
                                        std::size_t width = kMaxSentenceLength);

std::vector<const Sentence*> all_sentences(const Corpus& corpus);

}  // namespace seqcrf
