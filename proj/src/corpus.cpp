#include "seqcrf/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace seqcrf {

namespace {

bool word_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (word_char(c)) {
      word.push_back(ch);
    } else {
      flush();
      out.emplace_back(1, ch);
    }
  }
  flush();
  return out;
}

std::string lowercase(std::string_view token) {
  std::string out(token);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::size_t Corpus::sentence_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.sentences.size();
  return n;
}

std::size_t Corpus::span_count() const {
  std::size_t n = 0;
  for (const auto& d : documents)
    for (const auto& s : d.sentences) n += s.spans.size();
  return n;
}

std::vector<SpanAnnotation> annotations(const Corpus& corpus) {
  std::vector<SpanAnnotation> out;
  for (const auto& d : corpus.documents)
    for (std::size_t i = 0; i < d.sentences.size(); ++i)
      for (const auto& sp : d.sentences[i].spans) out.push_back({d.id, i, sp});
  return out;
}

std::vector<int> bio_encode(std::span<const Span> spans, std::size_t length, const LabelSpace& labels) {
  std::vector<int> out(length, labels.outside());
  std::vector<Span> sorted(spans.begin(), spans.end());
  std::sort(sorted.begin(), sorted.end());
  int last_end = -1;
  for (const auto& sp : sorted) {
    if (sp.start < 0 || sp.end < sp.start || static_cast<std::size_t>(sp.end) >= length) {
      throw std::invalid_argument("bio_encode: span [" + std::to_string(sp.start) + ", " +
                                  std::to_string(sp.end) + "] outside a sentence of length " +
                                  std::to_string(length));
    }
    if (sp.start <= last_end) {
      throw std::invalid_argument("bio_encode: span starting at " + std::to_string(sp.start) +
                                  " overlaps a span ending at " + std::to_string(last_end));
    }
    out[static_cast<std::size_t>(sp.start)] = labels.begin(sp.category);
    for (int t = sp.start + 1; t <= sp.end; ++t) out[static_cast<std::size_t>(t)] = labels.inside(sp.category);
    last_end = sp.end;
  }
  return out;
}

std::vector<Span> bio_decode(std::span<const int> labels, const LabelSpace& space) {
  std::vector<Span> out;
  std::optional<Span> open;
  auto close = [&] {
    if (open) out.push_back(*open);
    open.reset();
  };
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const int y = labels[t];
    const auto cat = space.category_of(y);
    if (!cat) {
      close();
      continue;
    }
    const int pos = static_cast<int>(t);
    if (space.is_inside(y) && open && open->category == *cat) {
      open->end = pos;
      continue;
    }
    close();
    open = Span{pos, pos, *cat};
  }
  close();
  return out;
}

Corpus parse_corpus(std::istream& in, std::string_view source) {
  const LabelSpace space;
  Corpus corpus;
  Sentence current;
  std::vector<int> labels;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) {
    throw CorpusError(std::string(source) + ":" + std::to_string(line_no) + ": " + what);
  };
  auto document = [&]() -> Document& {
    if (corpus.documents.empty()) corpus.documents.push_back({std::string(source), {}});
    return corpus.documents.back();
  };
  auto end_sentence = [&] {
    if (current.tokens.empty()) return;
    current.spans = bio_decode(labels, space);
    document().sentences.push_back(std::move(current));
    current = Sentence{};
    labels.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      end_sentence();
      continue;
    }
    if (line.rfind("#doc", 0) == 0) {
      end_sentence();
      std::string id = line.substr(4);
      const auto first = id.find_first_not_of(" \t");
      if (line.size() > 4 && line[4] != ' ' && line[4] != '\t') fail("malformed document line '" + line + "'");
      if (first == std::string::npos) fail("document line without an id");
      id = id.substr(first);
      corpus.documents.push_back({id, {}});
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || line.find('\t', tab + 1) != std::string::npos) {
      fail("expected 'surface<TAB>label', got '" + line + "'");
    }
    const std::string label = line.substr(tab + 1);
    int y = 0;
    try {
      y = space.index(label);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
    current.tokens.push_back(line.substr(0, tab));
    labels.push_back(y);
  }
  end_sentence();
  std::erase_if(corpus.documents, [](const Document& d) { return d.sentences.empty(); });
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus '" + path + "'");
  return parse_corpus(in, path);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  const LabelSpace space;
  for (const auto& doc : corpus.documents) {
    out << "#doc " << doc.id << '\n';
    for (const auto& s : doc.sentences) {
      const auto labels = bio_encode(s.spans, s.tokens.size(), space);
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        out << s.tokens[t] << '\t' << space.name(labels[t]) << '\n';
      }
      out << '\n';
    }
  }
}

void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write corpus '" + path + "'");
  write_corpus(out, corpus);
}

// ------------------------------------------------------------- vocabulary

Vocabulary::Vocabulary() { tokens_.push_back("<unk>"); }

void Vocabulary::add(std::string_view token) {
  std::string key = lowercase(token);
  if (index_.contains(key)) return;
  index_.emplace(key, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(key));
}

int Vocabulary::index(std::string_view token) const {
  const auto it = index_.find(lowercase(token));
  return it == index_.end() ? kUnknown : it->second;
}

Vocabulary Vocabulary::build(std::span<const Sentence* const> sentences) {
  Vocabulary v;
  for (const Sentence* s : sentences)
    for (const auto& tok : s->tokens) v.add(tok);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.empty() || tokens.front() != "<unk>") {
    throw std::invalid_argument("vocabulary must start with the <unk> entry");
  }
  Vocabulary v;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (v.index_.contains(tokens[i])) throw std::invalid_argument("duplicate vocabulary entry '" + tokens[i] + "'");
    v.index_.emplace(tokens[i], static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

// ---------------------------------------------------------------- batching

std::size_t SequenceBatch::max_length() const {
  std::size_t m = 0;
  for (auto l : lengths) m = std::max(m, l);
  return m;
}

template <typename S>
Array<S> SequenceBatch::mask_array() const {
  Array<S> out({rows, width});
  for (std::size_t i = 0; i < mask.size(); ++i) out.data[i] = mask[i] ? S(1) : S(0);
  return out;
}

template Array<float> SequenceBatch::mask_array<float>() const;
template Array<double> SequenceBatch::mask_array<double>() const;

SequenceBatch SequenceBatch::cropped(std::size_t w) const {
  if (w < max_length() || w > width) {
    throw std::invalid_argument("cannot crop a batch of width " + std::to_string(width) + " to " +
                                std::to_string(w));
  }
  SequenceBatch out = *this;
  out.width = w;
  out.tokens.assign(rows * w, 0);
  out.labels.assign(rows * w, -1);
  out.mask.assign(rows * w, 0);
  const std::size_t shift = width - w;
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t t = 0; t < w; ++t) {
      out.tokens[b * w + t] = tokens[b * width + shift + t];
      out.labels[b * w + t] = labels[b * width + shift + t];
      out.mask[b * w + t] = mask[b * width + shift + t];
    }
  return out;
}

std::vector<Span> crop_spans(std::span<const Span> spans, std::size_t width) {
  std::vector<Span> out;
  for (const auto& sp : spans)
    if (static_cast<std::size_t>(sp.end) < width) out.push_back(sp);
  return out;
}

std::vector<SequenceBatch> make_batches(std::span<const Sentence* const> sentences,
                                        const Vocabulary& vocab, const LabelSpace& labels,
                                        std::size_t batch_size, std::optional<std::uint64_t> shuffle_seed,
                                        std::size_t width) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (width == 0) throw std::invalid_argument("batch width must be positive");
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_seed) {
    // Fisher-Yates on raw engine output keeps the order identical across
    // standard library implementations.
    std::mt19937_64 rng(*shuffle_seed);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  }
  std::vector<SequenceBatch> out;
  for (std::size_t first = 0; first < order.size(); first += batch_size) {
    const std::size_t rows = std::min(batch_size, order.size() - first);
    SequenceBatch batch;
    batch.rows = rows;
    batch.width = width;
    batch.tokens.assign(rows * width, 0);
    batch.labels.assign(rows * width, -1);
    batch.mask.assign(rows * width, 0);
    for (std::size_t b = 0; b < rows; ++b) {
      const std::size_t id = order[first + b];
      const Sentence& s = *sentences[id];
      const std::size_t kept = std::min(width, s.tokens.size());
      const std::size_t off = width - kept;
      const auto gold = bio_encode(crop_spans(s.spans, kept), kept, labels);
      for (std::size_t t = 0; t < kept; ++t) {
        batch.tokens[b * width + off + t] = vocab.index(s.tokens[t]);
        batch.labels[b * width + off + t] = gold[t];
        batch.mask[b * width + off + t] = 1;
      }
      batch.lengths.push_back(kept);
      batch.original_lengths.push_back(s.tokens.size());
      batch.sentence_ids.push_back(id);
    }
    out.push_back(std::move(batch));
  }
  return out;
}

std::vector<const Sentence*> all_sentences(const Corpus& corpus) {
  std::vector<const Sentence*> out;
  for (const auto& d : corpus.documents)
    for (const auto& s : d.sentences) out.push_back(&s);
  return out;
}

}  // namespace seqcrf
