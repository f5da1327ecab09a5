#include "seqcrf/potentials.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace seqcrf {

// ---------------------------------------------------------------- labels

namespace {
constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "ADE", "Indication", "Other_SSD", "Severity", "Drugname",
    "Duration", "Dosage", "Route", "Frequency",
};
}  // namespace

std::string_view category_name(Category c) { return kCategoryNames[static_cast<int>(c)]; }

std::optional<Category> parse_category(std::string_view name) {
  if (name == "OtherSSD" || name == "Other SSD") return Category::kOtherSSD;
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (kCategoryNames[i] == name) return static_cast<Category>(i);
  }
  return std::nullopt;
}

LabelSpace::LabelSpace() : LabelSpace(std::vector<Category>(kAllCategories.begin(), kAllCategories.end())) {}

LabelSpace::LabelSpace(std::vector<Category> categories) : categories_(std::move(categories)) {
  slot_of_.fill(-1);
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    int& s = slot_of_[static_cast<int>(categories_[i])];
    if (s >= 0) {
      throw std::invalid_argument("LabelSpace: duplicate category " +
                                  std::string(category_name(categories_[i])));
    }
    s = static_cast<int>(i);
  }
}

int LabelSpace::slot(Category c) const {
  const int s = slot_of_[static_cast<int>(c)];
  if (s < 0) {
    throw std::invalid_argument("LabelSpace: category " + std::string(category_name(c)) +
                                " is not part of this label space");
  }
  return s;
}

int LabelSpace::begin(Category c) const { return 1 + 2 * slot(c); }
int LabelSpace::inside(Category c) const { return 2 + 2 * slot(c); }

std::optional<Category> LabelSpace::category_of(int label) const {
  if (label <= 0 || static_cast<std::size_t>(label) >= size()) return std::nullopt;
  return categories_[static_cast<std::size_t>((label - 1) / 2)];
}

std::string LabelSpace::name(int label) const {
  if (label == 0) return "O";
  auto c = category_of(label);
  if (!c) throw std::out_of_range("LabelSpace: label index " + std::to_string(label));
  return std::string(is_begin(label) ? "B-" : "I-") + std::string(category_name(*c));
}

int LabelSpace::index(std::string_view name) const {
  if (name == "O") return 0;
  if (name.size() < 3 || (name[0] != 'B' && name[0] != 'I') || name[1] != '-') {
    throw std::invalid_argument("malformed BIO label '" + std::string(name) + "'");
  }
  const std::string_view cat = name.substr(2);
  auto c = parse_category(cat);
  if (!c || slot_of_[static_cast<int>(*c)] < 0) {
    throw std::invalid_argument("unknown category '" + std::string(cat) + "'");
  }
  return name[0] == 'B' ? begin(*c) : inside(*c);
}

// ---------------------------------------------------------------- tables

template <typename S>
void PotentialTable<S>::validate() const {
  if (length == 0) throw std::invalid_argument("potential table: empty sentence");
  if (labels == 0) throw std::invalid_argument("potential table: no labels");
  if (unary.size() != length * labels) {
    throw std::invalid_argument("potential table: unary has " + std::to_string(unary.size()) +
                                " entries, expected " + std::to_string(length * labels));
  }
  const std::size_t expected = shared ? labels * labels : (length - 1) * labels * labels;
  if (pairwise.size() != expected) {
    throw std::invalid_argument("potential table: pairwise has " + std::to_string(pairwise.size()) +
                                " entries, expected " + std::to_string(expected));
  }
  for (S v : unary)
    if (!std::isfinite(v)) throw std::invalid_argument("potential table: non-finite unary");
  for (S v : pairwise)
    if (!std::isfinite(v)) throw std::invalid_argument("potential table: non-finite pairwise");
}

template <typename S>
PotentialTable<S> PotentialTable<S>::zeros(std::size_t length, std::size_t labels, bool shared) {
  PotentialTable<S> p;
  p.length = length;
  p.labels = labels;
  p.shared = shared;
  p.unary.assign(length * labels, S(0));
  p.pairwise.assign(shared ? labels * labels : (length > 0 ? length - 1 : 0) * labels * labels, S(0));
  return p;
}

template <typename S>
PotentialTable<S> PotentialVars<S>::sentence(std::size_t b) const {
  const std::size_t len = mask.shape.at(1);
  std::size_t first = len;
  for (std::size_t t = 0; t < len; ++t) {
    if (mask(b, t) > S(0)) {
      first = t;
      break;
    }
  }
  PotentialTable<S> out;
  out.labels = labels;
  out.length = len - first;
  out.shared = transition.has_value();
  for (std::size_t t = first; t < len; ++t) {
    auto u = unary[t].value();
    out.unary.insert(out.unary.end(), u.begin() + b * labels, u.begin() + (b + 1) * labels);
  }
  if (out.shared) {
    auto a = transition->value();
    out.pairwise.assign(a.begin(), a.end());
  } else {
    const std::size_t ll = labels * labels;
    for (std::size_t t = first; t + 1 < len; ++t) {
      auto p = pairwise[t].value();
      out.pairwise.insert(out.pairwise.end(), p.begin() + b * ll, p.begin() + (b + 1) * ll);
    }
  }
  return out;
}

// ---------------------------------------------------------------- heads

template <typename S>
UnaryHead<S>::UnaryHead(std::size_t feature_dim, std::size_t width, std::size_t labels)
    : hidden("unary.hidden", feature_dim, width), output("unary.output", width, labels) {}

template <typename S>
void UnaryHead<S>::init(std::mt19937_64& rng) {
  init_uniform(hidden.weight, rng, std::sqrt(6.0 / static_cast<double>(hidden.in_dim() + hidden.out_dim())));
  init_uniform(output.weight, rng, std::sqrt(6.0 / static_cast<double>(output.in_dim() + output.out_dim())));
}

template <typename S>
std::vector<Parameter<S>*> UnaryHead<S>::parameters() {
  return {&hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

template <typename S>
std::size_t UnaryHead<S>::count(std::size_t feature_dim, std::size_t width, std::size_t labels) {
  return DenseParams<S>::count(feature_dim, width) + DenseParams<S>::count(width, labels);
}

template <typename S>
std::vector<Var<S>> unary_head(const FeatureSequence<S>& seq, const UnaryVars<S>& head) {
  if (seq.dim() != head.hidden.weight.shape()[0]) {
    throw ShapeError("unary_head: features have dim " + std::to_string(seq.dim()) +
                     ", head expects " + shape_string(head.hidden.weight.shape()));
  }
  return dense_affine(dense_tanh(seq, head.hidden), head.output).steps;
}

template <typename S>
TransitionParams<S>::TransitionParams(const LabelSpace& labels)
    : matrix("transition", {labels.size(), labels.size()}) {
  if (labels.size() < 2) throw std::invalid_argument("transition matrix needs at least 2 labels");
}

template <typename S>
void TransitionParams<S>::init(std::mt19937_64& rng) {
  init_uniform(matrix, rng, 0.08);
}

template <typename S>
Var<S> transition_pairwise(Tape<S>& tape, TransitionParams<S>& params) {
  return tape.parameter(params.matrix);
}

template <typename S>
PairwiseHead<S>::PairwiseHead(std::size_t feature_dim, std::size_t width, std::size_t labels)
    : hidden("pairwise.hidden", 2 * feature_dim, width),
      output("pairwise.output", width, labels * labels),
      labels(labels) {}

template <typename S>
void PairwiseHead<S>::init(std::mt19937_64& rng) {
  init_uniform(hidden.weight, rng, std::sqrt(6.0 / static_cast<double>(hidden.in_dim() + hidden.out_dim())));
  init_uniform(output.weight, rng, std::sqrt(6.0 / static_cast<double>(output.in_dim() + output.out_dim())));
}

template <typename S>
std::vector<Parameter<S>*> PairwiseHead<S>::parameters() {
  return {&hidden.weight, &hidden.bias, &output.weight, &output.bias};
}

template <typename S>
std::size_t PairwiseHead<S>::count(std::size_t feature_dim, std::size_t width, std::size_t labels) {
  return DenseParams<S>::count(2 * feature_dim, width) + DenseParams<S>::count(width, labels * labels);
}

template <typename S>
Var<S> pairwise_scores(Var<S> left, Var<S> right, const PairwiseVars<S>& head) {
  Var<S> joined = ag::concat<S>({left, right}, 1);
  if (joined.shape()[1] != head.hidden.weight.shape()[0]) {
    throw ShapeError("neural_pairwise: window " + shape_string(joined.shape()) +
                     " does not match head " + shape_string(head.hidden.weight.shape()));
  }
  Var<S> hidden = ag::tanh(ag::add(ag::matmul(joined, head.hidden.weight), head.hidden.bias));
  Var<S> scores = ag::add(ag::matmul(hidden, head.output.weight), head.output.bias);
  return ag::reshape(scores, {joined.shape()[0], head.labels, head.labels});
}

template <typename S>
std::vector<Var<S>> neural_pairwise(const FeatureSequence<S>& seq, const PairwiseVars<S>& head) {
  std::vector<Var<S>> out;
  if (seq.length() < 2) return out;
  Tape<S>& tape = seq.steps[0].tape();
  const std::size_t rows = seq.batch();
  for (std::size_t t = 0; t + 1 < seq.length(); ++t) {
    Var<S> scores = pairwise_scores(seq.steps[t], seq.steps[t + 1], head);
    Var<S> keep = ag::reshape(mask_column(tape, seq.mask, t), {rows, 1, 1});
    out.push_back(ag::mul(scores, keep));
  }
  return out;
}

#define SEQCRF_INSTANTIATE_POTENTIALS(S)                                                     \
  template struct PotentialTable<S>;                                                         \
  template struct PotentialVars<S>;                                                          \
  template struct UnaryHead<S>;                                                              \
  template struct TransitionParams<S>;                                                       \
  template struct PairwiseHead<S>;                                                           \
  template std::vector<Var<S>> unary_head<S>(const FeatureSequence<S>&, const UnaryVars<S>&); \
  template Var<S> transition_pairwise<S>(Tape<S>&, TransitionParams<S>&);                    \
  template Var<S> pairwise_scores<S>(Var<S>, Var<S>, const PairwiseVars<S>&);                \
  template std::vector<Var<S>> neural_pairwise<S>(const FeatureSequence<S>&,                 \
                                                  const PairwiseVars<S>&);

SEQCRF_INSTANTIATE_POTENTIALS(float)
SEQCRF_INSTANTIATE_POTENTIALS(double)

#undef SEQCRF_INSTANTIATE_POTENTIALS

}  // namespace seqcrf
