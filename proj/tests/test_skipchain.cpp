#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "seqcrf/selftest.hpp"
#include "seqcrf/skipchain.hpp"

using namespace seqcrf;
using V = Var<double>;
using A = Array<double>;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 2.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

SkipPairTable<double> random_pairs(std::mt19937_64& rng, std::size_t T, std::size_t L) {
  SkipPairTable<double> pairs(T, L, T > 0 ? T - 1 : 0);
  for (auto& v : pairs.scores) v = std::uniform_real_distribution<double>(-2, 2)(rng);
  return pairs;
}

// Messages written straight from their defining sums.
void direct_messages(const std::vector<double>& unary, const SkipPairTable<double>& pairs, std::size_t m,
                     std::vector<double>& left, std::vector<double>& right) {
  const std::size_t T = pairs.length, L = pairs.labels;
  left.assign(T * L, 0.0);
  right.assign(T * L, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t i = 0; i < T; ++i) {
        const std::size_t gap = t > i ? t - i : i - t;
        if (gap == 0 || gap > m) continue;
        std::vector<double> terms;
        for (std::size_t b = 0; b < L; ++b) terms.push_back(pairs.at(t, i, a, b) + unary[i * L + b]);
        (i < t ? left : right)[t * L + a] += oracle::log_sum_exp(terms);
      }
}

std::vector<double> softmax_rows(const std::vector<double>& scores, std::size_t L) {
  std::vector<double> out(scores.size());
  for (std::size_t t = 0; t * L < scores.size(); ++t) {
    std::vector<double> row(scores.begin() + static_cast<std::ptrdiff_t>(t * L), scores.begin() + static_cast<std::ptrdiff_t>((t + 1) * L));
    const double z = oracle::log_sum_exp(row);
    for (std::size_t y = 0; y < L; ++y) out[t * L + y] = std::exp(row[y] - z);
  }
  return out;
}

// Batch of per-position potentials on a tape with `pads[b]` leading padded positions.
struct RecurrentInputs {
  std::vector<std::vector<double>> unary;     // T x (B*L)
  std::vector<std::vector<double>> pairwise;  // T-1 x (B*L*L)
  A mask;
};

RecurrentInputs random_inputs(std::mt19937_64& rng, std::size_t B, std::size_t T, std::size_t L,
                              const std::vector<std::size_t>& pads) {
  RecurrentInputs in;
  in.mask = A({B, T});
  in.unary.assign(T, std::vector<double>(B * L, 0.0));
  in.pairwise.assign(T > 0 ? T - 1 : 0, std::vector<double>(B * L * L, 0.0));
  std::uniform_real_distribution<double> d(-1, 1);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = pads[b]; t < T; ++t) {
      in.mask(b, t) = 1;
      for (std::size_t y = 0; y < L; ++y) in.unary[t][b * L + y] = d(rng);
      if (t + 1 < T)
        for (std::size_t k = 0; k < L * L; ++k) in.pairwise[t][b * L * L + k] = d(rng);
    }
  return in;
}

PotentialVars<double> on_tape(Tape<double>& tape, const RecurrentInputs& in, std::size_t L) {
  PotentialVars<double> pot;
  pot.labels = L;
  pot.mask = in.mask;
  const std::size_t B = in.mask.shape[0];
  for (const auto& u : in.unary) pot.unary.push_back(tape.constant(A({B, L}, u)));
  for (const auto& p : in.pairwise) pot.pairwise.push_back(tape.constant(A({B, L, L}, p)));
  return pot;
}

BetaEstimator<double> random_estimator(std::mt19937_64& rng, std::size_t L, std::size_t width) {
  BetaEstimator<double> est(L, width);
  for (auto* p : est.parameters())
    for (auto& v : p->value.data) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  return est;
}

std::vector<double> values(const V& v) { return {v.value().begin(), v.value().end()}; }

}  // namespace

TEST_SUITE("skipchain") {

TEST_CASE("zero potentials send log L from every neighbour") {
  const std::size_t T = 4, L = 2;
  const std::vector<double> unary(T * L, 0.0);
  SkipPairTable<double> pairs(T, L, 1);
  const auto msgs = beta_reference(std::span<const double>(unary), pairs, 1);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t y = 0; y < L; ++y) {
      CHECK(msgs.left[t * L + y] == doctest::Approx(t == 0 ? 0.0 : std::log(2.0)).epsilon(1e-14));
      CHECK(msgs.right[t * L + y] == doctest::Approx(t == T - 1 ? 0.0 : std::log(2.0)).epsilon(1e-14));
    }
  CHECK(msgs.skip_range == 1);
}

TEST_CASE("two-position reference marginals are the exact chain marginals") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const std::size_t L = 2 + i % 3;
    const auto unary = random_vector(rng, 2 * L);
    const auto psi = random_vector(rng, L * L);
    SkipPairTable<double> pairs(2, L, 1);
    for (std::size_t a = 0; a < L; ++a)
      for (std::size_t b = 0; b < L; ++b) {
        pairs.at(0, 1, a, b) = psi[a * L + b];
        pairs.at(1, 0, a, b) = psi[b * L + a];
      }
    auto msgs = beta_reference(std::span<const double>(unary), pairs, 1);
    const auto marg = skip_marginals(std::span<const double>(unary), msgs);
    const auto exact = oracle::enumerate_chain(
        2, L, [&](std::size_t t, std::size_t y) { return unary[t * L + y]; },
        [&](std::size_t, std::size_t a, std::size_t b) { return psi[a * L + b]; });
    for (std::size_t k = 0; k < 2 * L; ++k) CHECK(std::abs(marg[k] - exact.marginals[k]) <= 1e-8);
  }
}

TEST_CASE("chain pair table mirrors adjacent pairs") {
  std::mt19937_64 rng(2);
  auto chain = PotentialTable<double>::zeros(4, 3, false);
  for (auto& v : chain.pairwise) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  const auto pairs = SkipPairTable<double>::from_chain(chain);
  CHECK(pairs.reach == 1);
  for (std::size_t t = 0; t + 1 < 4; ++t)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b) {
        CHECK(pairs.at(t, t + 1, a, b) == chain.pair_at(t, a, b));
        CHECK(pairs.at(t + 1, t, b, a) == chain.pair_at(t, a, b));
      }
}

TEST_CASE("skip ranges beyond the sentence clamp to its length") {
  std::mt19937_64 rng(3);
  for (std::size_t T = 1; T <= 6; ++T) {
    const std::size_t L = 3;
    const auto unary = random_vector(rng, T * L);
    const auto pairs = random_pairs(rng, T, L);
    const auto base = beta_reference(std::span<const double>(unary), pairs, std::max<std::size_t>(1, T - 1));
    for (std::size_t m : {T, T + 1, T + 10}) {
      const auto wide = beta_reference(std::span<const double>(unary), pairs, m);
      CHECK(wide.left == base.left);
      CHECK(wide.right == base.right);
    }
  }
}

TEST_CASE("reference messages match their defining sums") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const std::size_t T = 1 + i % 7, L = 2 + i % 3, m = 1 + i % 4;
    const auto unary = random_vector(rng, T * L);
    const auto pairs = random_pairs(rng, T, L);
    const auto msgs = beta_reference(std::span<const double>(unary), pairs, m);
    std::vector<double> left, right;
    direct_messages(unary, pairs, m, left, right);
    for (std::size_t k = 0; k < T * L; ++k) {
      CHECK(msgs.left[k] == doctest::Approx(left[k]).epsilon(1e-12));
      CHECK(msgs.right[k] == doctest::Approx(right[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("skip range below one is rejected") {
  const std::vector<double> unary(4, 0.0);
  SkipPairTable<double> pairs(2, 2, 1);
  CHECK_THROWS(beta_reference(std::span<const double>(unary), pairs, 0));
}

TEST_CASE("pair table too short for the window is rejected") {
  const std::vector<double> unary(8, 0.0);
  SkipPairTable<double> pairs(4, 2, 1);
  CHECK_THROWS(beta_reference(std::span<const double>(unary), pairs, 2));
}

TEST_CASE("zero messages give the softmax of the unary scores") {
  std::mt19937_64 rng(5);
  const std::size_t T = 5, L = 4;
  const auto unary = random_vector(rng, T * L);
  MessageTable<double> msgs{T, L, std::vector<double>(T * L, 0.0), std::vector<double>(T * L, 0.0), {}, 0};
  const auto marg = skip_marginals(std::span<const double>(unary), msgs);
  const auto expect = softmax_rows(unary, L);
  for (std::size_t k = 0; k < T * L; ++k) CHECK(marg[k] == doctest::Approx(expect[k]).epsilon(1e-12));
}

TEST_CASE("all-zero inputs give uniform rows") {
  const std::size_t T = 3, L = 5;
  const std::vector<double> unary(T * L, 0.0);
  MessageTable<double> msgs{T, L, unary, unary, {}, 0};
  for (double v : skip_marginals(std::span<const double>(unary), msgs)) CHECK(v == doctest::Approx(0.2).epsilon(1e-14));
}

TEST_CASE("random marginals are normalised and follow the direct formula") {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const std::size_t T = 1 + i % 8, L = 2 + i % 4;
    const auto unary = random_vector(rng, T * L, 5.0);
    MessageTable<double> msgs{T, L, random_vector(rng, T * L, 5.0), random_vector(rng, T * L, 5.0), {}, 0};
    const auto marg = skip_marginals(std::span<const double>(unary), msgs);
    REQUIRE(msgs.log_partition.size() == T);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> scores(L);
      for (std::size_t y = 0; y < L; ++y) scores[y] = msgs.right[t * L + y] + msgs.left[t * L + y] + unary[t * L + y];
      const double z = oracle::log_sum_exp(scores);
      CHECK(msgs.log_partition[t] == doctest::Approx(z).epsilon(1e-12));
      double sum = 0;
      for (std::size_t y = 0; y < L; ++y) {
        sum += marg[t * L + y];
        CHECK(marg[t * L + y] == doctest::Approx(std::exp(scores[y] - z)).epsilon(1e-12));
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("uniform marginals cost log L per position") {
  const std::size_t T = 4, L = 3;
  const std::vector<double> marg(T * L, 1.0 / 3.0);
  const std::vector<int> gold{0, 2, 1, 1};
  CHECK(skipchain_loss(std::span<const double>(marg), L, std::span<const int>(gold)) ==
        doctest::Approx(4 * std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("certain gold marginals cost nothing") {
  const std::vector<double> marg{1, 0, 0, 0, 1, 0};
  const std::vector<int> gold{0, 1};
  CHECK(skipchain_loss(std::span<const double>(marg), 3, std::span<const int>(gold)) == 0.0);
}

TEST_CASE("loss from messages equals minus summed log marginals") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const std::size_t T = 1 + i % 6, L = 2 + i % 4;
    const auto unary = random_vector(rng, T * L);
    const auto pairs = random_pairs(rng, T, L);
    auto msgs = beta_reference(std::span<const double>(unary), pairs, 1 + i % 3);
    const auto marg = skip_marginals(std::span<const double>(unary), msgs);
    std::vector<int> gold(T);
    for (auto& g : gold) g = static_cast<int>(std::uniform_int_distribution<std::size_t>(0, L - 1)(rng));
    double expect = 0;
    for (std::size_t t = 0; t < T; ++t) expect -= std::log(marg[t * L + static_cast<std::size_t>(gold[t])]);
    CHECK(std::abs(skipchain_loss(std::span<const double>(unary), msgs, std::span<const int>(gold)) - expect) <= 1e-10);
    CHECK(std::abs(skipchain_loss(std::span<const double>(marg), L, std::span<const int>(gold)) - expect) <= 1e-10);
  }
}

TEST_CASE("gold label outside the label space is rejected") {
  const std::vector<double> marg(6, 1.0 / 3.0);
  const std::vector<int> gold{0, 3};
  CHECK_THROWS(skipchain_loss(std::span<const double>(marg), 3, std::span<const int>(gold)));
}

TEST_CASE("single position has no recurrent messages") {
  std::mt19937_64 rng(8);
  const std::size_t L = 3;
  auto est = random_estimator(rng, L, 4);
  auto in = random_inputs(rng, 1, 1, L, {0});
  Tape<double> tape;
  auto msgs = beta_recurrent(on_tape(tape, in, L), est.bind(tape));
  for (double v : msgs.left[0].value()) CHECK(v == 0.0);
  for (double v : msgs.right[0].value()) CHECK(v == 0.0);
}

TEST_CASE("zero estimator sends zero messages and reduces to the unary softmax") {
  std::mt19937_64 rng(9);
  const std::size_t L = 3, T = 5;
  BetaEstimator<double> est(L, 4);
  auto in = random_inputs(rng, 2, T, L, {0, 2});
  Tape<double> tape;
  auto pot = on_tape(tape, in, L);
  auto msgs = beta_recurrent(pot, est.bind(tape));
  for (std::size_t t = 0; t < T; ++t) {
    for (double v : msgs.left[t].value()) CHECK(v == 0.0);
    for (double v : msgs.right[t].value()) CHECK(v == 0.0);
  }
  auto logm = skip_log_marginals(pot, msgs);
  for (std::size_t t = 2; t < T; ++t)
    for (std::size_t b = 0; b < 2; ++b) {
      std::vector<double> row(in.unary[t].begin() + static_cast<std::ptrdiff_t>(b * L),
                              in.unary[t].begin() + static_cast<std::ptrdiff_t>((b + 1) * L));
      const auto expect = softmax_rows(row, L);
      for (std::size_t y = 0; y < L; ++y)
        CHECK(std::exp(logm[t].value()[b * L + y]) == doctest::Approx(expect[y]).epsilon(1e-12));
    }
}

TEST_CASE("recurrent messages look only in their own direction") {
  std::mt19937_64 rng(10);
  std::size_t left_changed = 0, right_changed = 0, probes = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t L = 3, T = 3 + i % 5;
    auto est = random_estimator(rng, L, 3);
    auto base = random_inputs(rng, 1, T, L, {0});
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, T - 1)(rng);
    auto probe = base;
    for (auto& v : probe.unary[j]) v += 0.5;
    if (j + 1 < T)
      for (auto& v : probe.pairwise[j]) v -= 0.5;
    Tape<double> tape;
    auto a = beta_recurrent(on_tape(tape, base, L), est.bind(tape));
    auto b = beta_recurrent(on_tape(tape, probe, L), est.bind(tape));
    for (std::size_t t = 0; t < T; ++t) {
      ++probes;
      if (j >= t) CHECK(values(a.left[t]) == values(b.left[t]));
      else left_changed += values(a.left[t]) != values(b.left[t]);
      if (j <= t) CHECK(values(a.right[t]) == values(b.right[t]));
      else right_changed += values(a.right[t]) != values(b.right[t]);
    }
  }
  CHECK(left_changed > 0);
  CHECK(right_changed > 0);
  CHECK(probes > 0);
}

TEST_CASE("perturbing an earlier position always moves later left messages") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const std::size_t L = 3, T = 5;
    auto est = random_estimator(rng, L, 3);
    auto base = random_inputs(rng, 1, T, L, {0});
    auto probe = base;
    probe.unary[1][0] += 1.0;
    Tape<double> tape;
    auto a = beta_recurrent(on_tape(tape, base, L), est.bind(tape));
    auto b = beta_recurrent(on_tape(tape, probe, L), est.bind(tape));
    for (std::size_t t = 2; t < T; ++t) CHECK(values(a.left[t]) != values(b.left[t]));
    CHECK(values(a.right[0]) != values(b.right[0]));
  }
}

TEST_CASE("recurrent messages vanish at sentence edges and padding") {
  std::mt19937_64 rng(12);
  const std::size_t L = 3, T = 6;
  auto est = random_estimator(rng, L, 4);
  auto in = random_inputs(rng, 3, T, L, {0, 2, 5});
  Tape<double> tape;
  auto pot = on_tape(tape, in, L);
  auto msgs = beta_recurrent(pot, est.bind(tape));
  for (std::size_t b = 0; b < 3; ++b) {
    const auto table = message_table(msgs, in.mask, b);
    const std::size_t n = table.length;
    CHECK(n == T - std::vector<std::size_t>{0, 2, 5}[b]);
    for (std::size_t y = 0; y < L; ++y) {
      CHECK(table.left[y] == 0.0);
      CHECK(table.right[(n - 1) * L + y] == 0.0);
    }
    for (std::size_t t = 0; t < T - n; ++t)
      for (std::size_t y = 0; y < L; ++y) {
        CHECK(msgs.left[t].value()[b * L + y] == 0.0);
        CHECK(msgs.right[t].value()[b * L + y] == 0.0);
      }
  }
}

TEST_CASE("recurrent marginals are normalised at every valid position") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 30; ++i) {
    const std::size_t L = 4, T = 5;
    auto est = random_estimator(rng, L, 3);
    auto in = random_inputs(rng, 2, T, L, {0, 1 + static_cast<std::size_t>(i % 4)});
    Tape<double> tape;
    auto pot = on_tape(tape, in, L);
    auto logm = skip_log_marginals(pot, beta_recurrent(pot, est.bind(tape)));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t b = 0; b < 2; ++b) {
        if (in.mask(b, t) == 0) continue;
        double sum = 0;
        for (std::size_t y = 0; y < L; ++y) sum += std::exp(logm[t].value()[b * L + y]);
        CHECK(std::abs(sum - 1.0) <= 1e-9);
      }
  }
}

TEST_CASE("batched skip-chain loss matches the per-sentence loss") {
  std::mt19937_64 rng(14);
  const std::size_t L = 3, T = 4;
  auto est = random_estimator(rng, L, 3);
  auto in = random_inputs(rng, 2, T, L, {0, 1});
  std::vector<int> gold{0, 2, 1, 1, -1, 1, 0, 2};
  Tape<double> tape;
  auto pot = on_tape(tape, in, L);
  auto msgs = beta_recurrent(pot, est.bind(tape));
  auto logm = skip_log_marginals(pot, msgs);
  const double batch = skipchain_batch_loss(logm, std::span<const int>(gold), in.mask).item();
  double expect = 0;
  for (std::size_t b = 0; b < 2; ++b) {
    auto table = message_table(msgs, in.mask, b);
    const auto sent = pot.sentence(b);
    const std::size_t off = T - table.length;
    std::vector<int> g(gold.begin() + static_cast<std::ptrdiff_t>(b * T + off), gold.begin() + static_cast<std::ptrdiff_t>((b + 1) * T));
    skip_marginals(std::span<const double>(sent.unary), table);
    expect += skipchain_loss(std::span<const double>(sent.unary), table, std::span<const int>(g));
  }
  CHECK(batch == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("estimator parameter count is closed form") {
  for (auto [L, K] : {std::pair<std::size_t, std::size_t>{19, 35}, {3, 2}}) {
    BetaEstimator<double> est(L, K);
    std::size_t total = 0;
    for (auto* p : est.parameters()) total += p->value.size();
    const std::size_t in = L + L * L;
    CHECK(total == BetaEstimator<double>::count(L, K));
    CHECK(total == 2 * (4 * K * (in + K) + 4 * K) + 2 * (K * L + L));
  }
}

TEST_CASE("skip-chain loss gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto report = check_loss_gradient(GradientTarget::kSkipChain, seed);
    INFO("seed " << seed << " worst " << report.max_rel_error);
    CHECK(report.passed);
    CHECK(report.max_rel_error <= 1e-4);
  }
}

}  // TEST_SUITE
