#include "seqcrf/layers.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace seqcrf {

template <typename S>
Var<S> mask_column(Tape<S>& tape, const Array<S>& mask, std::size_t t, bool complement) {
  const std::size_t rows = mask.shape[0];
  Array<S> col({rows, 1});
  for (std::size_t b = 0; b < rows; ++b) {
    const S m = mask(b, t);
    col.data[b] = complement ? S(1) - m : m;
  }
  return tape.constant(std::move(col));
}

template <typename S>
DenseParams<S>::DenseParams(const std::string& name, std::size_t in, std::size_t out)
    : weight(name + ".weight", {in, out}), bias(name + ".bias", {1, out}) {}

template <typename S>
LstmParams<S>::LstmParams(const std::string& name, std::size_t in, std::size_t hidden)
    : w_input(name + ".w_input", {in, 4 * hidden}),
      w_hidden(name + ".w_hidden", {hidden, 4 * hidden}),
      bias(name + ".bias", {1, 4 * hidden}) {}

template <typename S>
void init_uniform(Parameter<S>& p, std::mt19937_64& rng, double limit) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : p.value.data) v = static_cast<S>(dist(rng));
}

template <typename S>
void init_lstm(LstmParams<S>& p, std::mt19937_64& rng) {
  init_uniform(p.w_input, rng, 0.08);
  init_uniform(p.w_hidden, rng, 0.08);
  const std::size_t h = p.hidden();
  std::fill(p.bias.value.data.begin(), p.bias.value.data.end(), S(0));
  for (std::size_t j = h; j < 2 * h; ++j) p.bias.value.data[j] = S(1);
}

template <typename S>
Var<S> embed_step(Var<S> table, std::span<const int> tokens, Var<S> mask_col) {
  return ag::mul(ag::gather_rows(table, tokens), mask_col);
}

template <typename S>
FeatureSequence<S> embed(Var<S> table, std::span<const int> tokens, const Array<S>& mask) {
  const std::size_t rows = mask.shape.at(0), len = mask.shape.at(1);
  if (tokens.size() != rows * len) {
    throw ShapeError("embed: " + std::to_string(tokens.size()) + " tokens for mask " +
                     shape_string(mask.shape));
  }
  FeatureSequence<S> out;
  out.mask = mask;
  std::vector<int> column(rows);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t b = 0; b < rows; ++b) column[b] = tokens[b * len + t];
    out.steps.push_back(embed_step(table, std::span<const int>(column), mask_column(table.tape(), mask, t)));
  }
  return out;
}

template <typename S>
LstmStep<S> lstm_step(Var<S> input, Var<S> prev_hidden, Var<S> prev_cell, const LstmVars<S>& p) {
  const std::size_t h = p.hidden;
  if (prev_hidden.shape().size() != 2 || prev_hidden.shape()[1] != h ||
      prev_cell.shape() != prev_hidden.shape()) {
    throw ShapeError("lstm_step: state shapes " + shape_string(prev_hidden.shape()) + " and " +
                     shape_string(prev_cell.shape()) + " do not match hidden size " +
                     std::to_string(h));
  }
  Var<S> z = ag::add(ag::add(ag::matmul(input, p.w_input), ag::matmul(prev_hidden, p.w_hidden)),
                     p.bias);
  Var<S> i = ag::sigmoid(ag::slice(z, 1, 0, h));
  Var<S> f = ag::sigmoid(ag::slice(z, 1, h, 2 * h));
  Var<S> g = ag::tanh(ag::slice(z, 1, 2 * h, 3 * h));
  Var<S> o = ag::sigmoid(ag::slice(z, 1, 3 * h, 4 * h));
  Var<S> cell = ag::add(ag::mul(f, prev_cell), ag::mul(i, g));
  Var<S> hidden = ag::mul(o, ag::tanh(cell));
  return {hidden, cell};
}

template <typename S>
std::vector<Var<S>> lstm_scan(const FeatureSequence<S>& seq, const LstmVars<S>& p, bool reverse) {
  Tape<S>& tape = p.w_input.tape();
  const std::size_t rows = seq.batch(), len = seq.length();
  Var<S> h = tape.constant(Array<S>({rows, p.hidden}));
  Var<S> c = tape.constant(Array<S>({rows, p.hidden}));
  std::vector<Var<S>> out(len);
  for (std::size_t k = 0; k < len; ++k) {
    const std::size_t t = reverse ? len - 1 - k : k;
    LstmStep<S> step = lstm_step(seq.steps[t], h, c, p);
    Var<S> keep = mask_column(tape, seq.mask, t);
    Var<S> hold = mask_column(tape, seq.mask, t, true);
    out[t] = ag::mul(step.hidden, keep);
    h = ag::add(out[t], ag::mul(h, hold));
    c = ag::add(ag::mul(step.cell, keep), ag::mul(c, hold));
  }
  return out;
}

template <typename S>
FeatureSequence<S> bilstm_apply(const FeatureSequence<S>& seq, const LstmVars<S>& fwd,
                                const LstmVars<S>& bwd) {
  std::vector<Var<S>> left = lstm_scan(seq, fwd, false);
  std::vector<Var<S>> right = lstm_scan(seq, bwd, true);
  FeatureSequence<S> out;
  out.mask = seq.mask;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    out.steps.push_back(ag::concat<S>({left[t], right[t]}, 1));
  }
  return out;
}

namespace {

template <typename S>
FeatureSequence<S> dense_map(const FeatureSequence<S>& seq, const DenseVars<S>& p, bool squash) {
  FeatureSequence<S> out;
  out.mask = seq.mask;
  Tape<S>& tape = p.weight.tape();
  for (std::size_t t = 0; t < seq.length(); ++t) {
    Var<S> y = ag::add(ag::matmul(seq.steps[t], p.weight), p.bias);
    if (squash) y = ag::tanh(y);
    out.steps.push_back(ag::mul(y, mask_column(tape, seq.mask, t)));
  }
  return out;
}

}  // namespace

template <typename S>
FeatureSequence<S> dense_tanh(const FeatureSequence<S>& seq, const DenseVars<S>& p) {
  return dense_map(seq, p, true);
}

template <typename S>
FeatureSequence<S> dense_affine(const FeatureSequence<S>& seq, const DenseVars<S>& p) {
  return dense_map(seq, p, false);
}

template <typename S>
FeatureSequence<S> feature_normalize(const FeatureSequence<S>& seq, NormState<S>& state,
                                     NormMode mode) {
  const std::size_t rows = seq.batch(), len = seq.length(), dim = seq.dim();
  if (state.mean.size() != dim) {
    throw ShapeError("feature_normalize: state has " + std::to_string(state.mean.size()) +
                     " features, input has " + std::to_string(dim));
  }
  Tape<S>& tape = seq.steps.at(0).tape();
  FeatureSequence<S> out;
  out.mask = seq.mask;

  if (mode == NormMode::kRunning) {
    Array<S> shift({1, dim}), inv({1, dim});
    for (std::size_t d = 0; d < dim; ++d) {
      shift.data[d] = -state.mean[d];
      inv.data[d] = S(1) / std::sqrt(std::max(state.var[d], S(kVarianceFloor)));
    }
    Var<S> shift_v = tape.constant(std::move(shift));
    Var<S> inv_v = tape.constant(std::move(inv));
    for (std::size_t t = 0; t < len; ++t) {
      Var<S> y = ag::mul(ag::add(seq.steps[t], shift_v), inv_v);
      out.steps.push_back(ag::mul(y, mask_column(tape, seq.mask, t)));
    }
    return out;
  }

  S count = 0;
  for (S m : seq.mask.data) count += m;
  if (count <= S(0)) throw std::invalid_argument("feature_normalize: batch has no valid positions");

  Var<S> stacked = ag::concat<S>(std::span<const Var<S>>(seq.steps), 0);  // [T*B, D]
  Array<S> flat_mask({len * rows, 1});
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t b = 0; b < rows; ++b) flat_mask.data[t * rows + b] = seq.mask(b, t);
  Var<S> m = tape.constant(std::move(flat_mask));

  Var<S> mu = ag::scale(ag::sum_axis(ag::mul(stacked, m), 0, true), S(1) / count);
  Var<S> centered = ag::sub(stacked, mu);
  Var<S> sq = ag::mul(ag::mul(centered, centered), m);
  Var<S> var = ag::scale(ag::sum_axis(sq, 0, true), S(1) / count);

  // Floor the variance: keep the tracked value where it is large enough,
  // substitute the constant floor elsewhere.
  Array<S> keep({1, dim}), floor_part({1, dim});
  auto vv = var.value();
  for (std::size_t d = 0; d < dim; ++d) {
    const bool above = vv[d] >= S(kVarianceFloor);
    keep.data[d] = above ? S(1) : S(0);
    floor_part.data[d] = above ? S(0) : S(kVarianceFloor);
  }
  Var<S> var_eff = ag::add(ag::mul(var, tape.constant(std::move(keep))),
                           tape.constant(std::move(floor_part)));
  Var<S> inv_std = ag::exp(ag::scale(ag::log(var_eff), S(-0.5)));
  Var<S> normed = ag::mul(ag::mul(centered, inv_std), m);

  auto mu_v = mu.value();
  for (std::size_t d = 0; d < dim; ++d) {
    state.mean[d] = state.momentum * state.mean[d] + (S(1) - state.momentum) * mu_v[d];
    state.var[d] = state.momentum * state.var[d] + (S(1) - state.momentum) * vv[d];
  }
  for (std::size_t t = 0; t < len; ++t) {
    out.steps.push_back(ag::slice(normed, 0, t * rows, (t + 1) * rows));
  }
  return out;
}

template <typename S>
FeatureSequence<S> apply_dropout(const FeatureSequence<S>& seq, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return seq;
  if (p >= 1.0) throw std::invalid_argument("apply_dropout: probability must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const S scale = static_cast<S>(1.0 / (1.0 - p));
  FeatureSequence<S> out;
  out.mask = seq.mask;
  for (const auto& step : seq.steps) {
    Array<S> mask(step.shape());
    for (auto& v : mask.data) v = keep(rng) ? scale : S(0);
    out.steps.push_back(ag::dropout(step, mask));
  }
  return out;
}

std::size_t load_pretrained_embeddings(
    const std::string& path, const std::function<std::optional<int>(std::string_view)>& lookup,
    Parameter<float>& table) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file '" + path + "'");
  const std::size_t rows = table.value.shape.at(0), dim = table.value.shape.at(1);
  std::string line;
  std::size_t line_no = 0, assigned = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<float> values;
    float v;
    while (fields >> v) values.push_back(v);
    if (!fields.eof()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed number");
    }
    if (values.size() != dim) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected " +
                               std::to_string(dim) + " values, found " +
                               std::to_string(values.size()));
    }
    auto row = lookup(token);
    if (!row || *row < 0 || static_cast<std::size_t>(*row) >= rows) continue;
    std::copy(values.begin(), values.end(),
              table.value.data.begin() + static_cast<std::size_t>(*row) * dim);
    ++assigned;
  }
  return assigned;
}

#define SEQCRF_INSTANTIATE_LAYERS(S)                                                          \
  template struct DenseParams<S>;                                                             \
  template struct LstmParams<S>;                                                              \
  template Var<S> mask_column<S>(Tape<S>&, const Array<S>&, std::size_t, bool);               \
  template void init_uniform<S>(Parameter<S>&, std::mt19937_64&, double);                     \
  template void init_lstm<S>(LstmParams<S>&, std::mt19937_64&);                               \
  template Var<S> embed_step<S>(Var<S>, std::span<const int>, Var<S>);                        \
  template FeatureSequence<S> embed<S>(Var<S>, std::span<const int>, const Array<S>&);        \
  template LstmStep<S> lstm_step<S>(Var<S>, Var<S>, Var<S>, const LstmVars<S>&);              \
  template std::vector<Var<S>> lstm_scan<S>(const FeatureSequence<S>&, const LstmVars<S>&,    \
                                            bool);                                            \
  template FeatureSequence<S> bilstm_apply<S>(const FeatureSequence<S>&, const LstmVars<S>&,  \
                                              const LstmVars<S>&);                            \
  template FeatureSequence<S> dense_tanh<S>(const FeatureSequence<S>&, const DenseVars<S>&);  \
  template FeatureSequence<S> dense_affine<S>(const FeatureSequence<S>&, const DenseVars<S>&);\
  template FeatureSequence<S> feature_normalize<S>(const FeatureSequence<S>&, NormState<S>&,  \
                                                   NormMode);                                 \
  template FeatureSequence<S> apply_dropout<S>(const FeatureSequence<S>&, double,             \
                                               std::mt19937_64&);

SEQCRF_INSTANTIATE_LAYERS(float)
SEQCRF_INSTANTIATE_LAYERS(double)

#undef SEQCRF_INSTANTIATE_LAYERS

}  // namespace seqcrf
