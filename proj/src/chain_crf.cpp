#include "seqcrf/chain_crf.hpp"

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
void check_gold(const PotentialTable<S>& pot, std::span<const int> gold) {
  if (gold.size() != pot.length) {
    throw std::invalid_argument("gold sequence has length " + std::to_string(gold.size()) +
                                ", sentence has " + std::to_string(pot.length));
  }
  for (int y : gold) {
    if (y < 0 || static_cast<std::size_t>(y) >= pot.labels) {
      throw std::invalid_argument("gold label " + std::to_string(y) + " outside label space of " +
                                  std::to_string(pot.labels));
    }
  }
}

}  // namespace

TransitionMask bio_transition_mask(const LabelSpace& labels) {
  TransitionMask m;
  m.labels = labels.size();
  m.allowed.assign(m.labels * m.labels, 1);
  for (std::size_t a = 0; a < m.labels; ++a) {
    for (std::size_t b = 0; b < m.labels; ++b) {
      const int bi = static_cast<int>(b);
      if (!labels.is_inside(bi)) continue;
      auto from = labels.category_of(static_cast<int>(a));
      if (!from || *from != *labels.category_of(bi)) m.allowed[a * m.labels + b] = 0;
    }
  }
  return m;
}

template <typename S>
std::vector<S> forward_scores(const PotentialTable<S>& pot) {
  pot.validate();
  const std::size_t n = pot.length, l = pot.labels;
  std::vector<S> alpha(n * l);
  std::copy_n(pot.unary.begin(), l, alpha.begin());
  std::vector<S> scratch(l);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t y = 0; y < l; ++y) {
      for (std::size_t a = 0; a < l; ++a) scratch[a] = alpha[(t - 1) * l + a] + pot.pair_at(t - 1, a, y);
      alpha[t * l + y] = pot.unary_at(t, y) + lse(scratch.data(), l);
    }
  }
  return alpha;
}

template <typename S>
std::vector<S> backward_scores(const PotentialTable<S>& pot) {
  pot.validate();
  const std::size_t n = pot.length, l = pot.labels;
  std::vector<S> beta(n * l, S(0));
  std::vector<S> scratch(l);
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t a = 0; a < l; ++a) {
      for (std::size_t b = 0; b < l; ++b) {
        scratch[b] = pot.pair_at(t, a, b) + pot.unary_at(t + 1, b) + beta[(t + 1) * l + b];
      }
      beta[t * l + a] = lse(scratch.data(), l);
    }
  }
  return beta;
}

template <typename S>
S log_partition(const PotentialTable<S>& pot) {
  const auto alpha = forward_scores(pot);
  return lse(alpha.data() + (pot.length - 1) * pot.labels, pot.labels);
}

template <typename S>
std::vector<S> posterior_marginals(const PotentialTable<S>& pot) {
  const auto alpha = forward_scores(pot);
  const auto beta = backward_scores(pot);
  const std::size_t n = pot.length, l = pot.labels;
  const S log_z = lse(alpha.data() + (n - 1) * l, l);
  std::vector<S> marg(n * l);
  for (std::size_t i = 0; i < n * l; ++i) marg[i] = std::exp(alpha[i] + beta[i] - log_z);
  return marg;
}

template <typename S>
ViterbiResult<S> viterbi_decode(const PotentialTable<S>& pot, const TransitionMask* mask) {
  pot.validate();
  const std::size_t n = pot.length, l = pot.labels;
  if (mask && mask->labels != l) {
    throw std::invalid_argument("viterbi_decode: transition mask has " + std::to_string(mask->labels) +
                                " labels, potentials have " + std::to_string(l));
  }
  const S neg_inf = -std::numeric_limits<S>::infinity();
  std::vector<S> delta(n * l);
  std::vector<int> back(n * l, 0);
  std::copy_n(pot.unary.begin(), l, delta.begin());
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t y = 0; y < l; ++y) {
      S best = neg_inf;
      int arg = 0;
      for (std::size_t a = 0; a < l; ++a) {
        if (mask && !mask->permits(a, y)) continue;
        const S s = delta[(t - 1) * l + a] + pot.pair_at(t - 1, a, y);
        if (s > best) {
          best = s;
          arg = static_cast<int>(a);
        }
      }
      delta[t * l + y] = best + pot.unary_at(t, y);
      back[t * l + y] = arg;
    }
  }
  ViterbiResult<S> out;
  out.path.assign(n, 0);
  S best = neg_inf;
  for (std::size_t y = 0; y < l; ++y) {
    if (delta[(n - 1) * l + y] > best) {
      best = delta[(n - 1) * l + y];
      out.path[n - 1] = static_cast<int>(y);
    }
  }
  out.score = best;
  for (std::size_t t = n - 1; t > 0; --t) {
    out.path[t - 1] = back[t * l + static_cast<std::size_t>(out.path[t])];
  }
  return out;
}

template <typename S>
S sequence_score(const PotentialTable<S>& pot, std::span<const int> labels) {
  pot.validate();
  check_gold(pot, labels);
  S score = 0;
  for (std::size_t t = 0; t < pot.length; ++t) score += pot.unary_at(t, static_cast<std::size_t>(labels[t]));
  for (std::size_t t = 0; t + 1 < pot.length; ++t) {
    score += pot.pair_at(t, static_cast<std::size_t>(labels[t]), static_cast<std::size_t>(labels[t + 1]));
  }
  return score;
}

template <typename S>
S sequence_nll(const PotentialTable<S>& pot, std::span<const int> gold) {
  const S score = sequence_score(pot, gold);
  return log_partition(pot) - score;
}

template <typename S>
S marginal_ce_loss(const PotentialTable<S>& pot, std::span<const int> gold) {
  check_gold(pot, gold);
  const auto alpha = forward_scores(pot);
  const auto beta = backward_scores(pot);
  const std::size_t n = pot.length, l = pot.labels;
  const S log_z = lse(alpha.data() + (n - 1) * l, l);
  S loss = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t k = t * l + static_cast<std::size_t>(gold[t]);
    loss -= alpha[k] + beta[k] - log_z;
  }
  return loss;
}

template <typename S>
ChainInferenceResult<S> chain_inference(const PotentialTable<S>& pot) {
  ChainInferenceResult<S> r;
  r.log_partition = log_partition(pot);
  r.marginals = posterior_marginals(pot);
  r.best = viterbi_decode(pot);
  return r;
}

ChainInferenceResult<double> brute_force_oracle(const PotentialTable<double>& pot) {
  pot.validate();
  const std::size_t n = pot.length, l = pot.labels;
  std::size_t total = 1;
  for (std::size_t t = 0; t < n; ++t) {
    if (total > kBruteForceLimit / l) {
      throw std::invalid_argument("brute_force_oracle: " + std::to_string(l) + "^" + std::to_string(n) +
                                  " sequences exceed the enumeration limit of " +
                                  std::to_string(kBruteForceLimit));
    }
    total *= l;
  }

  // Lexicographic order with position 0 most significant.
  std::vector<double> scores(total);
  std::vector<int> seq(n, 0);
  ChainInferenceResult<double> r;
  r.best.score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < total; ++k) {
    double s = 0;
    for (std::size_t t = 0; t < n; ++t) s += pot.unary_at(t, static_cast<std::size_t>(seq[t]));
    for (std::size_t t = 0; t + 1 < n; ++t) {
      s += pot.pair_at(t, static_cast<std::size_t>(seq[t]), static_cast<std::size_t>(seq[t + 1]));
    }
    scores[k] = s;
    if (s > r.best.score) {
      r.best.score = s;
      r.best.path = seq;
    }
    for (std::size_t t = n; t-- > 0;) {
      if (++seq[t] < static_cast<int>(l)) break;
      seq[t] = 0;
    }
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double z = 0;
  for (double s : scores) z += std::exp(s - mx);
  r.log_partition = mx + std::log(z);

  r.marginals.assign(n * l, 0.0);
  std::fill(seq.begin(), seq.end(), 0);
  for (std::size_t k = 0; k < total; ++k) {
    const double p = std::exp(scores[k] - r.log_partition);
    for (std::size_t t = 0; t < n; ++t) r.marginals[t * l + static_cast<std::size_t>(seq[t])] += p;
    for (std::size_t t = n; t-- > 0;) {
      if (++seq[t] < static_cast<int>(l)) break;
      seq[t] = 0;
    }
  }
  return r;
}

// ---------------------------------------------------------------- tape side

namespace {

template <typename S>
void check_batch(const PotentialVars<S>& pot, const char* op) {
  const std::size_t rows = pot.mask.shape.at(0), len = pot.mask.shape.at(1);
  if (pot.unary.size() != len) {
    throw ShapeError(std::string(op) + ": " + std::to_string(pot.unary.size()) +
                     " unary steps for mask " + shape_string(pot.mask.shape));
  }
  if (!pot.transition && pot.pairwise.size() + 1 != len) {
    throw ShapeError(std::string(op) + ": " + std::to_string(pot.pairwise.size()) +
                     " pairwise steps for length " + std::to_string(len));
  }
  for (std::size_t b = 0; b < rows; ++b) {
    if (pot.mask(b, len - 1) <= S(0)) {
      throw std::invalid_argument(std::string(op) + ": batch row " + std::to_string(b) +
                                  " is an empty sentence");
    }
  }
}

template <typename S>
Var<S> pair_step(const PotentialVars<S>& pot, std::size_t t) {
  if (pot.transition) {
    return ag::reshape(*pot.transition, {1, pot.labels, pot.labels});
  }
  return pot.pairwise[t];
}

template <typename S>
std::vector<Var<S>> alphas(const PotentialVars<S>& pot) {
  Tape<S>& tape = pot.unary[0].tape();
  const std::size_t rows = pot.mask.shape[0], l = pot.labels;
  std::vector<Var<S>> alpha{pot.unary[0]};
  for (std::size_t t = 1; t < pot.unary.size(); ++t) {
    Var<S> prev = ag::reshape(alpha.back(), {rows, l, 1});
    Var<S> carried = ag::logsumexp(ag::add(prev, pair_step(pot, t - 1)), 1);
    alpha.push_back(ag::add(ag::mul(carried, mask_column(tape, pot.mask, t - 1)), pot.unary[t]));
  }
  return alpha;
}

template <typename S>
std::vector<Var<S>> betas(const PotentialVars<S>& pot) {
  Tape<S>& tape = pot.unary[0].tape();
  const std::size_t rows = pot.mask.shape[0], l = pot.labels, len = pot.unary.size();
  std::vector<Var<S>> beta(len);
  beta[len - 1] = tape.constant(Array<S>({rows, l}));
  for (std::size_t t = len - 1; t-- > 0;) {
    Var<S> next = ag::reshape(ag::add(pot.unary[t + 1], beta[t + 1]), {rows, 1, l});
    beta[t] = ag::logsumexp(ag::add(pair_step(pot, t), next), 2);
  }
  return beta;
}

template <typename S>
Array<S> one_hot_step(std::span<const int> gold, std::size_t rows, std::size_t len, std::size_t t,
                      std::size_t labels) {
  Array<S> hot({rows, labels});
  for (std::size_t b = 0; b < rows; ++b) {
    const int y = gold[b * len + t];
    if (y < 0) continue;
    if (static_cast<std::size_t>(y) >= labels) {
      throw std::invalid_argument("gold label " + std::to_string(y) + " outside label space of " +
                                  std::to_string(labels));
    }
    hot(b, static_cast<std::size_t>(y)) = S(1);
  }
  return hot;
}

template <typename S>
void check_gold_batch(const PotentialVars<S>& pot, std::span<const int> gold) {
  const std::size_t rows = pot.mask.shape[0], len = pot.mask.shape[1];
  if (gold.size() != rows * len) {
    throw ShapeError("gold labels: " + std::to_string(gold.size()) + " entries for mask " +
                     shape_string(pot.mask.shape));
  }
  for (std::size_t b = 0; b < rows; ++b)
    for (std::size_t t = 0; t < len; ++t)
      if ((gold[b * len + t] >= 0) != (pot.mask(b, t) > S(0))) {
        throw std::invalid_argument("gold labels disagree with the mask at row " + std::to_string(b) +
                                    ", position " + std::to_string(t));
      }
}

}  // namespace

template <typename S>
Var<S> chain_log_partition(const PotentialVars<S>& pot) {
  check_batch(pot, "chain_log_partition");
  return ag::logsumexp(alphas(pot).back(), 1);
}

template <typename S>
Var<S> chain_sequence_nll(const PotentialVars<S>& pot, std::span<const int> gold) {
  check_batch(pot, "chain_sequence_nll");
  check_gold_batch(pot, gold);
  Tape<S>& tape = pot.unary[0].tape();
  const std::size_t rows = pot.mask.shape[0], len = pot.mask.shape[1], l = pot.labels;

  std::vector<Var<S>> terms;
  for (std::size_t t = 0; t < len; ++t) {
    Var<S> hot = tape.constant(one_hot_step<S>(gold, rows, len, t, l));
    terms.push_back(ag::sum(ag::mul(pot.unary[t], hot)));
  }
  if (pot.transition) {
    Array<S> counts({l, l});
    for (std::size_t b = 0; b < rows; ++b)
      for (std::size_t t = 0; t + 1 < len; ++t) {
        const int a = gold[b * len + t], c = gold[b * len + t + 1];
        if (a >= 0 && c >= 0) counts(static_cast<std::size_t>(a), static_cast<std::size_t>(c)) += S(1);
      }
    terms.push_back(ag::sum(ag::mul(*pot.transition, tape.constant(std::move(counts)))));
  } else {
    for (std::size_t t = 0; t + 1 < len; ++t) {
      Array<S> hot({rows, l, l});
      bool any = false;
      for (std::size_t b = 0; b < rows; ++b) {
        const int a = gold[b * len + t], c = gold[b * len + t + 1];
        if (a < 0 || c < 0) continue;
        hot.data[(b * l + static_cast<std::size_t>(a)) * l + static_cast<std::size_t>(c)] = S(1);
        any = true;
      }
      if (any) terms.push_back(ag::sum(ag::mul(pot.pairwise[t], tape.constant(std::move(hot)))));
    }
  }
  Var<S> gold_score = terms[0];
  for (std::size_t i = 1; i < terms.size(); ++i) gold_score = ag::add(gold_score, terms[i]);
  return ag::sub(ag::sum(chain_log_partition(pot)), gold_score);
}

template <typename S>
std::vector<Var<S>> chain_log_marginals(const PotentialVars<S>& pot) {
  check_batch(pot, "chain_log_marginals");
  const std::size_t rows = pot.mask.shape[0];
  std::vector<Var<S>> alpha = alphas(pot);
  std::vector<Var<S>> beta = betas(pot);
  Var<S> log_z = ag::reshape(ag::logsumexp(alpha.back(), 1), {rows, 1});
  std::vector<Var<S>> out;
  for (std::size_t t = 0; t < alpha.size(); ++t) {
    out.push_back(ag::sub(ag::add(alpha[t], beta[t]), log_z));
  }
  return out;
}

template <typename S>
Var<S> chain_marginal_ce(const PotentialVars<S>& pot, std::span<const int> gold) {
  check_batch(pot, "chain_marginal_ce");
  check_gold_batch(pot, gold);
  Tape<S>& tape = pot.unary[0].tape();
  const std::size_t rows = pot.mask.shape[0], len = pot.mask.shape[1];
  std::vector<Var<S>> log_marg = chain_log_marginals(pot);
  std::vector<Var<S>> picked;
  for (std::size_t t = 0; t < len; ++t) {
    Var<S> hot = tape.constant(one_hot_step<S>(gold, rows, len, t, pot.labels));
    picked.push_back(ag::sum(ag::mul(log_marg[t], hot)));
  }
  Var<S> total = picked[0];
  for (std::size_t i = 1; i < picked.size(); ++i) total = ag::add(total, picked[i]);
  return ag::scale(total, S(-1));
}

#define SEQCRF_INSTANTIATE_CHAIN(S)                                                        \
  template std::vector<S> forward_scores<S>(const PotentialTable<S>&);                     \
  template std::vector<S> backward_scores<S>(const PotentialTable<S>&);                    \
  template S log_partition<S>(const PotentialTable<S>&);                                   \
  template std::vector<S> posterior_marginals<S>(const PotentialTable<S>&);                \
  template ViterbiResult<S> viterbi_decode<S>(const PotentialTable<S>&, const TransitionMask*); \
  template S sequence_score<S>(const PotentialTable<S>&, std::span<const int>);            \
  template S sequence_nll<S>(const PotentialTable<S>&, std::span<const int>);              \
  template S marginal_ce_loss<S>(const PotentialTable<S>&, std::span<const int>);          \
  template ChainInferenceResult<S> chain_inference<S>(const PotentialTable<S>&);           \
  template Var<S> chain_log_partition<S>(const PotentialVars<S>&);                         \
  template Var<S> chain_sequence_nll<S>(const PotentialVars<S>&, std::span<const int>);    \
  template Var<S> chain_marginal_ce<S>(const PotentialVars<S>&, std::span<const int>);     \
  template std::vector<Var<S>> chain_log_marginals<S>(const PotentialVars<S>&);

SEQCRF_INSTANTIATE_CHAIN(float)
SEQCRF_INSTANTIATE_CHAIN(double)

#undef SEQCRF_INSTANTIATE_CHAIN

}  // namespace seqcrf
