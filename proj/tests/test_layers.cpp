#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "seqcrf/layers.hpp"

using namespace seqcrf;
using V = Var<double>;
using A = Array<double>;

namespace {

void fill_uniform(Parameter<double>& p, std::mt19937_64& rng, double limit) {
  std::uniform_real_distribution<double> d(-limit, limit);
  for (auto& v : p.value.data) v = d(rng);
}

LstmParams<double> random_lstm(std::mt19937_64& rng, std::size_t in, std::size_t hidden) {
  LstmParams<double> p("lstm", in, hidden);
  fill_uniform(p.w_input, rng, 0.7);
  fill_uniform(p.w_hidden, rng, 0.7);
  fill_uniform(p.bias, rng, 0.7);
  return p;
}

// One LSTM step computed scalar by scalar from the gate equations.
void scalar_lstm_step(const LstmParams<double>& p, const std::vector<double>& x, std::vector<double>& h,
                      std::vector<double>& c) {
  const std::size_t in = p.input_dim(), H = p.hidden();
  std::vector<double> z(4 * H);
  for (std::size_t j = 0; j < 4 * H; ++j) {
    double s = p.bias.value.data[j];
    for (std::size_t k = 0; k < in; ++k) s += x[k] * p.w_input.value.data[k * 4 * H + j];
    for (std::size_t k = 0; k < H; ++k) s += h[k] * p.w_hidden.value.data[k * 4 * H + j];
    z[j] = s;
  }
  for (std::size_t j = 0; j < H; ++j) {
    const double i = oracle::sigmoid(z[j]);
    const double f = oracle::sigmoid(z[H + j]);
    const double g = std::tanh(z[2 * H + j]);
    const double o = oracle::sigmoid(z[3 * H + j]);
    c[j] = f * c[j] + i * g;
    h[j] = o * std::tanh(c[j]);
  }
}

// Random [B, T] feature sequence with `pads[b]` leading padded positions per row.
struct RandomSequence {
  std::vector<std::vector<double>> steps;  // T x (B*D)
  A mask;
};

RandomSequence random_sequence(std::mt19937_64& rng, std::size_t B, std::size_t T, std::size_t D,
                               const std::vector<std::size_t>& pads) {
  RandomSequence out;
  out.mask = A({B, T});
  std::uniform_real_distribution<double> d(-1, 1);
  out.steps.assign(T, std::vector<double>(B * D, 0.0));
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t t = pads[b]; t < T; ++t) {
      out.mask(b, t) = 1;
      for (std::size_t k = 0; k < D; ++k) out.steps[t][b * D + k] = d(rng);
    }
  }
  return out;
}

FeatureSequence<double> on_tape(Tape<double>& tape, const RandomSequence& s, std::size_t D, bool tracked = false) {
  FeatureSequence<double> seq;
  seq.mask = s.mask;
  const std::size_t B = s.mask.shape[0];
  for (const auto& step : s.steps) {
    A a({B, D}, step);
    seq.steps.push_back(tracked ? tape.variable(std::move(a)) : tape.constant(std::move(a)));
  }
  return seq;
}

std::vector<double> row(const V& v, std::size_t b) {
  const std::size_t D = v.shape()[1];
  auto val = v.value();
  return {val.begin() + static_cast<std::ptrdiff_t>(b * D), val.begin() + static_cast<std::ptrdiff_t>((b + 1) * D)};
}

}  // namespace

TEST_SUITE("layers") {

TEST_CASE("embedding returns table rows verbatim") {
  Tape<double> tape;
  V table = tape.constant(A({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  A mask({1, 2}, 1.0);
  const std::vector<int> tokens{0, 2};
  auto seq = embed(table, std::span<const int>(tokens), mask);
  REQUIRE(seq.length() == 2);
  CHECK(row(seq.steps[0], 0) == std::vector<double>{1, 0, 0});
  CHECK(row(seq.steps[1], 0) == std::vector<double>{0, 0, 1});
}

TEST_CASE("fully masked sentence embeds to zeros") {
  Tape<double> tape;
  V table = tape.constant(A({3, 2}, {1, 2, 3, 4, 5, 6}));
  A mask({1, 3}, 0.0);
  const std::vector<int> tokens{0, 1, 2};
  auto seq = embed(table, std::span<const int>(tokens), mask);
  for (const auto& s : seq.steps)
    for (double v : s.value()) CHECK(v == 0.0);
}

TEST_CASE("random embedding lookups match direct row reads") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1, 1);
  std::uniform_int_distribution<int> tok(0, 9);
  A table({10, 4});
  for (auto& v : table.data) v = d(rng);
  const std::size_t B = 3, T = 5;
  std::vector<int> tokens(B * T);
  for (auto& t : tokens) t = tok(rng);
  A mask({B, T}, 1.0);
  Tape<double> tape;
  auto seq = embed(tape.constant(table), std::span<const int>(tokens), mask);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t k = 0; k < 4; ++k)
        CHECK(seq.steps[t].value()[b * 4 + k] == table(static_cast<std::size_t>(tokens[b * T + t]), k));
}

TEST_CASE("token index beyond the table is rejected") {
  Tape<double> tape;
  V table = tape.constant(A({3, 2}));
  A mask({1, 1}, 1.0);
  const std::vector<int> tokens{3};
  CHECK_THROWS(embed(table, std::span<const int>(tokens), mask));
}

TEST_CASE("zero LSTM gives zero state") {
  LstmParams<double> p("lstm", 3, 2);
  Tape<double> tape;
  auto step = lstm_step(tape.constant(A({1, 3}, {0.4, -2.0, 7.0})), tape.constant(A({1, 2})),
                        tape.constant(A({1, 2})), p.bind(tape));
  for (double v : step.hidden.value()) CHECK(v == 0.0);
  for (double v : step.cell.value()) CHECK(v == 0.0);
}

TEST_CASE("closed input gate halves the cell") {
  LstmParams<double> p("lstm", 2, 3);
  for (std::size_t j = 0; j < 3; ++j) p.bias.value.data[j] = -1e9;
  Tape<double> tape;
  auto step = lstm_step(tape.constant(A({1, 2}, {0.3, 0.9})), tape.constant(A({1, 3}, {0.1, 0.2, 0.3})),
                        tape.constant(A({1, 3}, {2.0, -4.0, 1.0})), p.bind(tape));
  CHECK(step.cell.value()[0] == doctest::Approx(1.0));
  CHECK(step.cell.value()[1] == doctest::Approx(-2.0));
  CHECK(step.cell.value()[2] == doctest::Approx(0.5));
}

TEST_CASE("random LSTM step matches the scalar recomputation") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto p = random_lstm(rng, 4, 3);
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<double> x(4), h(3), c(3);
    for (auto& v : x) v = d(rng);
    for (auto& v : h) v = d(rng);
    for (auto& v : c) v = d(rng);
    Tape<double> tape;
    auto step = lstm_step(tape.constant(A({1, 4}, x)), tape.constant(A({1, 3}, h)), tape.constant(A({1, 3}, c)),
                          p.bind(tape));
    scalar_lstm_step(p, x, h, c);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(step.hidden.value()[j] == doctest::Approx(h[j]).epsilon(1e-12));
      CHECK(step.cell.value()[j] == doctest::Approx(c[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("LSTM dimension mismatch is rejected") {
  LstmParams<double> p("lstm", 2, 3);
  Tape<double> tape;
  CHECK_THROWS(lstm_step(tape.constant(A({1, 5})), tape.constant(A({1, 3})), tape.constant(A({1, 3})), p.bind(tape)));
  CHECK_THROWS(lstm_step(tape.constant(A({1, 2})), tape.constant(A({1, 4})), tape.constant(A({1, 3})), p.bind(tape)));
}

TEST_CASE("single-position BiLSTM concatenates one step each way") {
  std::mt19937_64 rng(2);
  auto fwd = random_lstm(rng, 3, 2);
  auto bwd = random_lstm(rng, 3, 2);
  const std::vector<double> x{0.5, -0.25, 1.0};
  Tape<double> tape;
  FeatureSequence<double> seq{{tape.constant(A({1, 3}, x))}, A({1, 1}, 1.0)};
  auto out = bilstm_apply(seq, fwd.bind(tape), bwd.bind(tape));
  std::vector<double> hf(2), cf(2), hb(2), cb(2);
  scalar_lstm_step(fwd, x, hf, cf);
  scalar_lstm_step(bwd, x, hb, cb);
  const auto got = row(out.steps[0], 0);
  REQUIRE(got.size() == 4);
  CHECK(got[0] == doctest::Approx(hf[0]));
  CHECK(got[1] == doctest::Approx(hf[1]));
  CHECK(got[2] == doctest::Approx(hb[0]));
  CHECK(got[3] == doctest::Approx(hb[1]));
}

TEST_CASE("random BiLSTM matches manually unrolled loops") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    auto fwd = random_lstm(rng, 3, 2);
    auto bwd = random_lstm(rng, 3, 2);
    const std::size_t T = 4;
    auto s = random_sequence(rng, 1, T, 3, {0});
    Tape<double> tape;
    auto out = bilstm_apply(on_tape(tape, s, 3), fwd.bind(tape), bwd.bind(tape));
    std::vector<std::vector<double>> left(T), right(T);
    std::vector<double> h(2, 0.0), c(2, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      scalar_lstm_step(fwd, s.steps[t], h, c);
      left[t] = h;
    }
    std::fill(h.begin(), h.end(), 0.0);
    std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t t = T; t-- > 0;) {
      scalar_lstm_step(bwd, s.steps[t], h, c);
      right[t] = h;
    }
    for (std::size_t t = 0; t < T; ++t) {
      const auto got = row(out.steps[t], 0);
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(got[j] == doctest::Approx(left[t][j]).epsilon(1e-12));
        CHECK(got[2 + j] == doctest::Approx(right[t][j]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("padding never changes outputs at valid positions") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto fwd = random_lstm(rng, 3, 2);
    auto bwd = random_lstm(rng, 3, 2);
    DenseParams<double> dense("dense", 4, 3);
    fill_uniform(dense.weight, rng, 1.0);
    fill_uniform(dense.bias, rng, 1.0);
    const std::size_t T = 5, pad = 1 + seed % 4;
    auto s = random_sequence(rng, 1, T, 3, {0});
    // Same sentence preceded by `pad` masked positions holding junk values.
    RandomSequence padded;
    padded.mask = A({1, T + pad});
    std::uniform_real_distribution<double> junk(-5, 5);
    for (std::size_t t = 0; t < pad; ++t) padded.steps.push_back({junk(rng), junk(rng), junk(rng)});
    for (std::size_t t = 0; t < T; ++t) {
      padded.steps.push_back(s.steps[t]);
      padded.mask(0, pad + t) = 1;
    }
    auto run = [&](const RandomSequence& in) {
      Tape<double> tape;
      auto feats = on_tape(tape, in, 3);
      // embed() zeroes padded rows; emulate that for the junk input.
      for (std::size_t t = 0; t < feats.length(); ++t)
        feats.steps[t] = ag::mul(feats.steps[t], mask_column(tape, in.mask, t));
      auto bi = bilstm_apply(feats, fwd.bind(tape), bwd.bind(tape));
      auto out = dense_tanh(bi, dense.bind(tape));
      std::vector<std::vector<double>> rows;
      for (const auto& st : out.steps) rows.push_back(row(st, 0));
      return rows;
    };
    const auto a = run(s);
    const auto b = run(padded);
    for (std::size_t t = 0; t < pad; ++t)
      for (double v : b[t]) CHECK(v == 0.0);
    for (std::size_t t = 0; t < T; ++t) CHECK(a[t] == b[pad + t]);
  }
}

TEST_CASE("masked rows emit zeros inside a mixed batch") {
  std::mt19937_64 rng(8);
  auto fwd = random_lstm(rng, 2, 3);
  auto bwd = random_lstm(rng, 2, 3);
  auto s = random_sequence(rng, 3, 4, 2, {0, 2, 4});
  Tape<double> tape;
  auto out = bilstm_apply(on_tape(tape, s, 2), fwd.bind(tape), bwd.bind(tape));
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t b = 0; b < 3; ++b)
      if (s.mask(b, t) == 0)
        for (double v : row(out.steps[t], b)) CHECK(v == 0.0);
}

TEST_CASE("dense tanh with zero weights outputs tanh of the bias") {
  DenseParams<double> p("dense", 3, 2);
  p.bias.value.data = {0.5, -1.0};
  std::mt19937_64 rng(1);
  auto s = random_sequence(rng, 2, 3, 3, {0, 1});
  Tape<double> tape;
  auto out = dense_tanh(on_tape(tape, s, 3), p.bind(tape));
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t b = 0; b < 2; ++b) {
      const auto r = row(out.steps[t], b);
      if (s.mask(b, t) == 0) {
        CHECK(r == std::vector<double>{0, 0});
      } else {
        CHECK(r[0] == std::tanh(0.5));
        CHECK(r[1] == std::tanh(-1.0));
      }
    }
}

TEST_CASE("dense tanh with identity weights maps zero to zero") {
  DenseParams<double> p("dense", 3, 3);
  for (std::size_t i = 0; i < 3; ++i) p.weight.value(i, i) = 1.0;
  Tape<double> tape;
  FeatureSequence<double> seq{{tape.constant(A({1, 3}))}, A({1, 1}, 1.0)};
  auto out = dense_tanh(seq, p.bind(tape));
  for (double v : out.steps[0].value()) CHECK(v == 0.0);
}

TEST_CASE("random dense tanh matches per-position computation") {
  std::mt19937_64 rng(12);
  DenseParams<double> p("dense", 4, 3);
  fill_uniform(p.weight, rng, 1.0);
  fill_uniform(p.bias, rng, 1.0);
  auto s = random_sequence(rng, 2, 5, 4, {0, 2});
  Tape<double> tape;
  auto out = dense_tanh(on_tape(tape, s, 4), p.bind(tape));
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t b = 0; b < 2; ++b) {
      const std::vector<double> x(s.steps[t].begin() + static_cast<std::ptrdiff_t>(b * 4),
                                  s.steps[t].begin() + static_cast<std::ptrdiff_t>(b * 4 + 4));
      const auto y = oracle::matmul(x, p.weight.value.data, 1, 4, 3);
      const auto r = row(out.steps[t], b);
      for (std::size_t j = 0; j < 3; ++j) {
        const double expect = s.mask(b, t) ? std::tanh(y[j] + p.bias.value.data[j]) : 0.0;
        CHECK(r[j] == doctest::Approx(expect).epsilon(1e-12));
      }
    }
}

TEST_CASE("dense dimension mismatch is rejected") {
  DenseParams<double> p("dense", 4, 3);
  Tape<double> tape;
  FeatureSequence<double> seq{{tape.constant(A({1, 5}))}, A({1, 1}, 1.0)};
  CHECK_THROWS(dense_tanh(seq, p.bind(tape)));
}

TEST_CASE("constant feature normalises to zero") {
  Tape<double> tape;
  FeatureSequence<double> seq;
  seq.mask = A({2, 2}, 1.0);
  seq.steps = {tape.constant(A({2, 2}, {3.0, 1.0, 3.0, 2.0})), tape.constant(A({2, 2}, {3.0, 5.0, 3.0, 4.0}))};
  NormState<double> state(2);
  auto out = feature_normalize(seq, state, NormMode::kBatch);
  for (const auto& s : out.steps) {
    CHECK(s.value()[0] == 0.0);
    CHECK(s.value()[2] == 0.0);
  }
}

TEST_CASE("standardised feature is left unchanged") {
  // Values {-1, 1, -1, 1} have mean 0 and population variance 1.
  Tape<double> tape;
  FeatureSequence<double> seq;
  seq.mask = A({2, 2}, 1.0);
  seq.steps = {tape.constant(A({2, 1}, {-1.0, 1.0})), tape.constant(A({2, 1}, {1.0, -1.0}))};
  NormState<double> state(1);
  auto out = feature_normalize(seq, state, NormMode::kBatch);
  CHECK(out.steps[0].value()[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(out.steps[0].value()[1] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.steps[1].value()[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(out.steps[1].value()[1] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("normalised masked batch has zero mean and unit variance over valid positions") {
  std::mt19937_64 rng(21);
  auto s = random_sequence(rng, 4, 6, 3, {0, 2, 5, 3});
  for (auto& step : s.steps)
    for (std::size_t i = 0; i < step.size(); ++i) step[i] = step[i] * 3.0 + 2.0;
  Tape<double> tape;
  NormState<double> state(3);
  auto out = feature_normalize(on_tape(tape, s, 3), state, NormMode::kBatch);
  for (std::size_t k = 0; k < 3; ++k) {
    double sum = 0, sq = 0, n = 0;
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t b = 0; b < 4; ++b) {
        const double v = out.steps[t].value()[b * 3 + k];
        if (s.mask(b, t) == 0) {
          CHECK(v == 0.0);
          continue;
        }
        sum += v;
        sq += v * v;
        n += 1;
      }
    CHECK(std::abs(sum / n) < 1e-12);
    CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("running mode uses the stored statistics") {
  NormState<double> state(2);
  state.mean = {1.0, -2.0};
  state.var = {4.0, 0.0};
  Tape<double> tape;
  FeatureSequence<double> seq{{tape.constant(A({1, 2}, {3.0, -2.0}))}, A({1, 1}, 1.0)};
  auto out = feature_normalize(seq, state, NormMode::kRunning);
  CHECK(out.steps[0].value()[0] == doctest::Approx(1.0));
  CHECK(out.steps[0].value()[1] == 0.0);
  CHECK(state.mean == std::vector<double>{1.0, -2.0});
}

TEST_CASE("batch with no valid position is rejected by normalisation") {
  Tape<double> tape;
  FeatureSequence<double> seq{{tape.constant(A({1, 2}))}, A({1, 1}, 0.0)};
  NormState<double> state(2);
  CHECK_THROWS(feature_normalize(seq, state, NormMode::kBatch));
}

TEST_CASE("dropout is inverted and identity at zero rate") {
  Tape<double> tape;
  A ones({50, 40}, 1.0);
  FeatureSequence<double> seq{{tape.constant(ones)}, A({50, 1}, 1.0)};
  std::mt19937_64 rng(3);
  auto same = apply_dropout(seq, 0.0, rng);
  CHECK(same.steps[0].id() == seq.steps[0].id());
  auto dropped = apply_dropout(seq, 0.5, rng);
  double total = 0;
  for (double v : dropped.steps[0].value()) {
    CHECK((v == 0.0 || v == 2.0));
    total += v;
  }
  CHECK(total / 2000.0 == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("parameter counts are closed-form dimension sums") {
  for (auto [in, out] : {std::pair<std::size_t, std::size_t>{3, 5}, {200, 250}, {1, 1}}) {
    DenseParams<double> d("d", in, out);
    CHECK(DenseParams<double>::count(in, out) == d.weight.value.size() + d.bias.value.size());
    CHECK(DenseParams<double>::count(in, out) == in * out + out);
    LstmParams<double> l("l", in, out);
    CHECK(LstmParams<double>::count(in, out) ==
          l.w_input.value.size() + l.w_hidden.value.size() + l.bias.value.size());
    CHECK(LstmParams<double>::count(in, out) == 4 * out * (in + out) + 4 * out);
  }
}

TEST_CASE("LSTM initialisation stays in range with unit forget bias") {
  LstmParams<double> p("lstm", 5, 4);
  std::mt19937_64 rng(1);
  init_lstm(p, rng);
  for (double v : p.w_input.value.data) CHECK(std::abs(v) <= 0.08);
  for (double v : p.w_hidden.value.data) CHECK(std::abs(v) <= 0.08);
  for (std::size_t j = 0; j < 16; ++j) CHECK(p.bias.value.data[j] == (j >= 4 && j < 8 ? 1.0 : 0.0));
}

TEST_CASE("layer gradients match central differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    auto fwd = random_lstm(rng, 2, 2);
    auto bwd = random_lstm(rng, 2, 2);
    DenseParams<double> dense("dense", 4, 3);
    fill_uniform(dense.weight, rng, 1.0);
    fill_uniform(dense.bias, rng, 1.0);
    auto s = random_sequence(rng, 2, 3, 2, {0, 1});
    std::vector<Parameter<double>*> params{&fwd.w_input, &fwd.w_hidden, &fwd.bias, &bwd.w_input,
                                           &bwd.w_hidden, &bwd.bias, &dense.weight, &dense.bias};
    auto loss = [&](Tape<double>& tape) {
      NormState<double> state(4);
      auto bi = bilstm_apply(on_tape(tape, s, 2), fwd.bind(tape), bwd.bind(tape));
      auto normed = feature_normalize(bi, state, NormMode::kBatch);
      auto out = dense_tanh(normed, dense.bind(tape));
      V total = ag::sum(out.steps[0]);
      for (std::size_t t = 1; t < out.length(); ++t) total = ag::add(total, ag::scale(ag::sum(out.steps[t]), double(t + 1)));
      return total;
    };
    for (auto* p : params) p->zero_grad();
    {
      Tape<double> tape;
      tape.backward(loss(tape));
    }
    for (auto* p : params) {
      auto f = [&](const std::vector<double>& x) {
        const auto keep = p->value.data;
        p->value.data = x;
        Tape<double> tape;
        const double v = loss(tape).item();
        p->value.data = keep;
        return v;
      };
      INFO(p->name << " seed " << seed);
      CHECK(oracle::max_relative_error(p->grad, oracle::numeric_gradient(f, p->value.data)) <= 1e-4);
    }
  }
}

TEST_CASE("pretrained embeddings overwrite matching rows") {
  const auto path = std::filesystem::temp_directory_path() / "seqcrf_test_vectors.txt";
  {
    std::ofstream out(path);
    out << "warfarin 0.5 -0.25\n"
        << "unseen 9 9\n"
        << "Rash 1 2\n";
  }
  Parameter<float> table("embedding", {3, 2});
  auto lookup = [](std::string_view tok) -> std::optional<int> {
    if (tok == "warfarin") return 1;
    if (tok == "rash") return 2;
    return std::nullopt;
  };
  const std::size_t set = load_pretrained_embeddings(path.string(), lookup, table);
  std::filesystem::remove(path);
  CHECK(set == 1);
  CHECK(table.value(1, 0) == 0.5f);
  CHECK(table.value(1, 1) == -0.25f);
  CHECK(table.value(0, 0) == 0.0f);
}

TEST_CASE("pretrained embedding file with the wrong width is rejected") {
  const auto path = std::filesystem::temp_directory_path() / "seqcrf_test_vectors_bad.txt";
  {
    std::ofstream out(path);
    out << "warfarin 0.5 -0.25 1.0\n";
  }
  Parameter<float> table("embedding", {3, 2});
  auto lookup = [](std::string_view) -> std::optional<int> { return 1; };
  CHECK_THROWS(load_pretrained_embeddings(path.string(), lookup, table));
  std::filesystem::remove(path);
}

}  // TEST_SUITE
