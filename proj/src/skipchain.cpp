#include "seqcrf/skipchain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace seqcrf {

namespace {

template <typename S>
S lse(const S* v, std::size_t n) {
  S mx = -std::numeric_limits<S>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (std::isinf(mx)) return mx;
  S acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(v[i] - mx);
  return mx + std::log(acc);
}

template <typename S>
void check_labels(std::span<const int> gold, std::size_t labels, std::size_t length) {
  if (gold.size() != length) {
    throw std::invalid_argument("gold sequence has length " + std::to_string(gold.size()) +
                                ", sentence has " + std::to_string(length));
  }
  for (int y : gold) {
    if (y < 0 || static_cast<std::size_t>(y) >= labels) {
      throw std::invalid_argument("gold label " + std::to_string(y) + " outside label space of " +
                                  std::to_string(labels));
    }
  }
}

}  // namespace

template <typename S>
SkipPairTable<S>::SkipPairTable(std::size_t length, std::size_t labels, std::size_t reach)
    : length(length), labels(labels), reach(reach), scores(length * length * labels * labels, S(0)) {}

template <typename S>
SkipPairTable<S> SkipPairTable<S>::from_chain(const PotentialTable<S>& chain) {
  chain.validate();
  SkipPairTable<S> t(chain.length, chain.labels, 1);
  for (std::size_t p = 0; p + 1 < chain.length; ++p)
    for (std::size_t a = 0; a < chain.labels; ++a)
      for (std::size_t b = 0; b < chain.labels; ++b) {
        t.at(p, p + 1, a, b) = chain.pair_at(p, a, b);
        t.at(p + 1, p, b, a) = chain.pair_at(p, a, b);
      }
  return t;
}

template <typename S>
MessageTable<S> beta_reference(std::span<const S> unary, const SkipPairTable<S>& pairs, std::size_t m) {
  if (m < 1) throw std::invalid_argument("beta_reference: skip range must be at least 1");
  const std::size_t n = pairs.length, l = pairs.labels;
  if (n == 0) throw std::invalid_argument("beta_reference: empty sentence");
  if (unary.size() != n * l) {
    throw std::invalid_argument("beta_reference: unary has " + std::to_string(unary.size()) +
                                " entries, expected " + std::to_string(n * l));
  }
  const std::size_t window = std::min(m, n - 1);
  if (window > pairs.reach) {
    throw std::invalid_argument("beta_reference: skip range " + std::to_string(window) +
                                " exceeds the pair table reach " + std::to_string(pairs.reach));
  }
  MessageTable<S> msgs;
  msgs.length = n;
  msgs.labels = l;
  msgs.skip_range = m;
  msgs.left.assign(n * l, S(0));
  msgs.right.assign(n * l, S(0));
  std::vector<S> scratch(l);
  auto message = [&](std::size_t t, std::size_t i, std::size_t yt) {
    for (std::size_t yi = 0; yi < l; ++yi) scratch[yi] = pairs.at(t, i, yt, yi) + unary[i * l + yi];
    return lse(scratch.data(), l);
  };
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= window ? t - window : 0;
    const std::size_t hi = std::min(n - 1, t + window);
    for (std::size_t yt = 0; yt < l; ++yt) {
      S left = 0, right = 0;
      for (std::size_t i = lo; i < t; ++i) left += message(t, i, yt);
      for (std::size_t i = t + 1; i <= hi; ++i) right += message(t, i, yt);
      msgs.left[t * l + yt] = left;
      msgs.right[t * l + yt] = right;
    }
  }
  return msgs;
}

template <typename S>
std::vector<S> skip_marginals(std::span<const S> unary, MessageTable<S>& msgs) {
  const std::size_t n = msgs.length, l = msgs.labels;
  if (unary.size() != n * l || msgs.left.size() != n * l || msgs.right.size() != n * l) {
    throw std::invalid_argument("skip_marginals: unary and message tables disagree in size");
  }
  std::vector<S> marg(n * l);
  msgs.log_partition.assign(n, S(0));
  for (std::size_t t = 0; t < n; ++t) {
    S* row = marg.data() + t * l;
    for (std::size_t y = 0; y < l; ++y) {
      const std::size_t k = t * l + y;
      row[y] = msgs.right[k] + msgs.left[k] + unary[k];
    }
    const S z = lse(row, l);
    msgs.log_partition[t] = z;
    for (std::size_t y = 0; y < l; ++y) row[y] = std::exp(row[y] - z);
  }
  return marg;
}

template <typename S>
S skipchain_loss(std::span<const S> marginals, std::size_t labels, std::span<const int> gold) {
  if (labels == 0 || marginals.size() % labels != 0) {
    throw std::invalid_argument("skipchain_loss: marginal table is not a multiple of the label count");
  }
  check_labels<S>(gold, labels, marginals.size() / labels);
  S loss = 0;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    loss -= std::log(marginals[t * labels + static_cast<std::size_t>(gold[t])]);
  }
  return loss;
}

template <typename S>
S skipchain_loss(std::span<const S> unary, const MessageTable<S>& msgs, std::span<const int> gold) {
  check_labels<S>(gold, msgs.labels, msgs.length);
  if (msgs.log_partition.size() != msgs.length) {
    throw std::invalid_argument("skipchain_loss: message table has no partition values");
  }
  S loss = 0;
  for (std::size_t t = 0; t < msgs.length; ++t) {
    const std::size_t k = t * msgs.labels + static_cast<std::size_t>(gold[t]);
    loss -= msgs.right[k] + msgs.left[k] + unary[k] - msgs.log_partition[t];
  }
  return loss;
}

// ---------------------------------------------------------------- estimator

template <typename S>
BetaEstimator<S>::BetaEstimator(std::size_t labels, std::size_t width)
    : left("beta.left", input_dim(labels), width),
      right("beta.right", input_dim(labels), width),
      left_proj("beta.left_proj", width, labels),
      right_proj("beta.right_proj", width, labels) {}

template <typename S>
void BetaEstimator<S>::init(std::mt19937_64& rng) {
  init_lstm(left, rng);
  init_lstm(right, rng);
  init_uniform(left_proj.weight, rng, 0.08);
  init_uniform(right_proj.weight, rng, 0.08);
}

template <typename S>
std::vector<Parameter<S>*> BetaEstimator<S>::parameters() {
  std::vector<Parameter<S>*> out;
  for (auto* p : left.parameters()) out.push_back(p);
  for (auto* p : right.parameters()) out.push_back(p);
  for (auto* p : left_proj.parameters()) out.push_back(p);
  for (auto* p : right_proj.parameters()) out.push_back(p);
  return out;
}

template <typename S>
BetaEstimatorVars<S> BetaEstimator<S>::bind(Tape<S>& tape) {
  return {left.bind(tape), right.bind(tape), left_proj.bind(tape), right_proj.bind(tape)};
}

template <typename S>
std::size_t BetaEstimator<S>::count(std::size_t labels, std::size_t width) {
  return 2 * LstmParams<S>::count(input_dim(labels), width) + 2 * DenseParams<S>::count(width, labels);
}

template <typename S>
MessageVars<S> beta_recurrent(const PotentialVars<S>& pot, const BetaEstimatorVars<S>& est) {
  const std::size_t len = pot.unary.size();
  if (len == 0) throw std::invalid_argument("beta_recurrent: empty batch");
  if (pot.transition || pot.pairwise.size() + 1 != len) {
    throw ShapeError("beta_recurrent: needs per-position pairwise potentials (" +
                     std::to_string(pot.pairwise.size()) + " for length " + std::to_string(len) + ")");
  }
  Tape<S>& tape = pot.unary[0].tape();
  const std::size_t rows = pot.mask.shape[0], l = pot.labels;
  if (est.left.w_input.shape()[0] != BetaEstimator<S>::input_dim(l)) {
    throw ShapeError("beta_recurrent: estimator input " + shape_string(est.left.w_input.shape()) +
                     " does not match " + std::to_string(l) + " labels");
  }

  FeatureSequence<S> features;
  features.mask = pot.mask;
  Var<S> zero_pair = tape.constant(Array<S>({rows, l * l}));
  for (std::size_t t = 0; t < len; ++t) {
    Var<S> pair = t + 1 < len ? ag::reshape(pot.pairwise[t], {rows, l * l}) : zero_pair;
    features.steps.push_back(ag::concat<S>({pot.unary[t], pair}, 1));
  }
  std::vector<Var<S>> fwd = lstm_scan(features, est.left, false);
  std::vector<Var<S>> bwd = lstm_scan(features, est.right, true);

  MessageVars<S> msgs;
  Var<S> zero = tape.constant(Array<S>({rows, l}));
  for (std::size_t t = 0; t < len; ++t) {
    Var<S> here = mask_column(tape, pot.mask, t);
    if (t == 0) {
      msgs.left.push_back(zero);
    } else {
      Var<S> proj = ag::add(ag::matmul(fwd[t - 1], est.left_proj.weight), est.left_proj.bias);
      msgs.left.push_back(ag::mul(ag::mul(proj, mask_column(tape, pot.mask, t - 1)), here));
    }
    if (t + 1 == len) {
      msgs.right.push_back(zero);
    } else {
      Var<S> proj = ag::add(ag::matmul(bwd[t + 1], est.right_proj.weight), est.right_proj.bias);
      msgs.right.push_back(ag::mul(proj, here));
    }
  }
  return msgs;
}

template <typename S>
std::vector<Var<S>> skip_log_marginals(const PotentialVars<S>& pot, const MessageVars<S>& msgs) {
  const std::size_t len = pot.unary.size(), rows = pot.mask.shape[0];
  if (msgs.left.size() != len || msgs.right.size() != len) {
    throw ShapeError("skip_log_marginals: message length disagrees with potentials");
  }
  std::vector<Var<S>> out;
  for (std::size_t t = 0; t < len; ++t) {
    Var<S> score = ag::add(ag::add(msgs.right[t], msgs.left[t]), pot.unary[t]);
    Var<S> log_z = ag::reshape(ag::logsumexp(score, 1), {rows, 1});
    out.push_back(ag::sub(score, log_z));
  }
  return out;
}

template <typename S>
Var<S> skipchain_batch_loss(const std::vector<Var<S>>& log_marginals, std::span<const int> gold,
                            const Array<S>& mask) {
  const std::size_t rows = mask.shape.at(0), len = mask.shape.at(1);
  if (log_marginals.size() != len || gold.size() != rows * len) {
    throw ShapeError("skipchain_batch_loss: gold/marginals disagree with mask " + shape_string(mask.shape));
  }
  Tape<S>& tape = log_marginals[0].tape();
  const std::size_t l = log_marginals[0].shape()[1];
  Var<S> total;
  for (std::size_t t = 0; t < len; ++t) {
    Array<S> hot({rows, l});
    for (std::size_t b = 0; b < rows; ++b) {
      const int y = gold[b * len + t];
      if (y < 0) continue;
      if (static_cast<std::size_t>(y) >= l) {
        throw std::invalid_argument("gold label " + std::to_string(y) + " outside label space of " +
                                    std::to_string(l));
      }
      hot(b, static_cast<std::size_t>(y)) = S(1);
    }
    Var<S> term = ag::sum(ag::mul(log_marginals[t], tape.constant(std::move(hot))));
    total = total.valid() ? ag::add(total, term) : term;
  }
  return ag::scale(total, S(-1));
}

template <typename S>
MessageTable<S> message_table(const MessageVars<S>& msgs, const Array<S>& mask, std::size_t b) {
  const std::size_t len = mask.shape.at(1);
  const std::size_t l = msgs.left.at(0).shape()[1];
  MessageTable<S> out;
  out.labels = l;
  for (std::size_t t = 0; t < len; ++t) {
    if (mask(b, t) <= S(0)) continue;
    auto lv = msgs.left[t].value();
    auto rv = msgs.right[t].value();
    out.left.insert(out.left.end(), lv.begin() + b * l, lv.begin() + (b + 1) * l);
    out.right.insert(out.right.end(), rv.begin() + b * l, rv.begin() + (b + 1) * l);
    ++out.length;
  }
  return out;
}

#define SEQCRF_INSTANTIATE_SKIP(S)                                                               \
  template struct SkipPairTable<S>;                                                              \
  template struct BetaEstimator<S>;                                                              \
  template MessageTable<S> beta_reference<S>(std::span<const S>, const SkipPairTable<S>&,        \
                                             std::size_t);                                       \
  template std::vector<S> skip_marginals<S>(std::span<const S>, MessageTable<S>&);               \
  template S skipchain_loss<S>(std::span<const S>, std::size_t, std::span<const int>);           \
  template S skipchain_loss<S>(std::span<const S>, const MessageTable<S>&, std::span<const int>);\
  template MessageVars<S> beta_recurrent<S>(const PotentialVars<S>&, const BetaEstimatorVars<S>&);\
  template std::vector<Var<S>> skip_log_marginals<S>(const PotentialVars<S>&, const MessageVars<S>&); \
  template Var<S> skipchain_batch_loss<S>(const std::vector<Var<S>>&, std::span<const int>,      \
                                          const Array<S>&);                                      \
  template MessageTable<S> message_table<S>(const MessageVars<S>&, const Array<S>&, std::size_t);

SEQCRF_INSTANTIATE_SKIP(float)
SEQCRF_INSTANTIATE_SKIP(double)

#undef SEQCRF_INSTANTIATE_SKIP

}  // namespace seqcrf
