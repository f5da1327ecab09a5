#include "seqcrf/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "seqcrf/skipchain.hpp"
#include "seqcrf/trainer.hpp"

namespace seqcrf {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxDetails = 5;

void record_failure(SuiteResult& r, const std::string& module, std::uint64_t seed, const std::string& what) {
  ++r.failures;
  if (r.details.size() < kMaxDetails) r.details.push_back(module + " seed " + std::to_string(seed) + ": " + what);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Random pre-padded batch of `rows` sentences of 1..width tokens.
SequenceBatch random_batch(std::mt19937_64& rng, std::size_t rows, std::size_t width, std::size_t vocab,
                           std::size_t labels) {
  SequenceBatch b;
  b.rows = rows;
  b.width = width;
  b.tokens.assign(rows * width, 0);
  b.labels.assign(rows * width, -1);
  b.mask.assign(rows * width, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t len = r == 0 ? width : between(rng, 1, width);
    for (std::size_t t = width - len; t < width; ++t) {
      b.tokens[r * width + t] = static_cast<int>(between(rng, 0, vocab - 1));
      b.labels[r * width + t] = static_cast<int>(between(rng, 0, labels - 1));
      b.mask[r * width + t] = 1;
    }
    b.lengths.push_back(len);
    b.original_lengths.push_back(len);
    b.sentence_ids.push_back(r);
  }
  return b;
}

struct RandomPotentials {
  Array<double> mask;
  std::vector<Array<double>> unary;
  std::vector<Array<double>> pairwise;
};

RandomPotentials random_potential_arrays(std::mt19937_64& rng, std::size_t rows, std::size_t len, std::size_t l) {
  RandomPotentials p;
  p.mask = Array<double>({rows, len});
  std::vector<std::size_t> offset(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    offset[r] = r == 0 ? 0 : between(rng, 0, len - 1);
    for (std::size_t t = offset[r]; t < len; ++t) p.mask(r, t) = 1.0;
  }
  for (std::size_t t = 0; t < len; ++t) {
    Array<double> u({rows, l});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t y = 0; y < l; ++y) u(r, y) = t >= offset[r] ? uniform(rng, -2, 2) : 0.0;
    p.unary.push_back(std::move(u));
  }
  for (std::size_t t = 0; t + 1 < len; ++t) {
    Array<double> pw({rows, l, l});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < l * l; ++k) pw.data[r * l * l + k] = t >= offset[r] ? uniform(rng, -2, 2) : 0.0;
    p.pairwise.push_back(std::move(pw));
  }
  return p;
}

PotentialVars<double> bind_potentials(Tape<double>& tape, const RandomPotentials& p, std::size_t l) {
  PotentialVars<double> pv;
  pv.labels = l;
  pv.mask = p.mask;
  for (const auto& u : p.unary) pv.unary.push_back(tape.constant(u));
  for (const auto& w : p.pairwise) pv.pairwise.push_back(tape.constant(w));
  return pv;
}

BetaEstimator<double> random_estimator(std::mt19937_64& rng, std::size_t l, std::size_t width) {
  BetaEstimator<double> est(l, width);
  est.init(rng);
  for (auto* p : est.parameters())
    for (double& v : p->value.data) v = uniform(rng, -0.5, 0.5);
  return est;
}

}  // namespace

bool SelftestReport::passed() const {
  if (suites.empty()) return false;
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed(); });
}

std::string SelftestReport::summary() const {
  std::ostringstream out;
  for (const auto& s : suites) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-4s %-34s %5zu cases  %3zu failed  worst %-9s %.2fs\n", s.passed() ? "PASS" : "FAIL",
                  s.name.c_str(), s.cases, s.failures, fmt(s.worst).c_str(), s.seconds);
    out << buf;
    for (const auto& d : s.details) out << "       " << d << '\n';
  }
  out << (passed() ? "selftest passed\n" : "selftest FAILED\n");
  return out.str();
}

ChainImplementation ChainImplementation::reference() {
  return {[](const PotentialTable<double>& p) { return seqcrf::log_partition(p); },
          [](const PotentialTable<double>& p) { return posterior_marginals(p); },
          [](const PotentialTable<double>& p) { return viterbi_decode(p); }};
}

PotentialTable<double> random_potentials(std::mt19937_64& rng, std::size_t length, std::size_t labels, bool shared,
                                         double scale) {
  PotentialTable<double> p = PotentialTable<double>::zeros(length, labels, shared);
  for (double& v : p.unary) v = uniform(rng, -scale, scale);
  for (double& v : p.pairwise) v = uniform(rng, -scale, scale);
  return p;
}

std::string_view gradient_target_name(GradientTarget t) {
  switch (t) {
    case GradientTarget::kChainMarginalCe: return "marginal cross-entropy";
    case GradientTarget::kChainSequenceNll: return "sequence NLL";
    case GradientTarget::kSkipChain: return "skip-chain cross-entropy";
  }
  return "?";
}

GradCheckReport check_loss_gradient(GradientTarget target, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const LabelSpace labels({Category::kADE, Category::kDrugname});
  ModelDims dims;
  dims.vocab = 6;
  dims.embedding = 3;
  dims.hidden = 2;
  dims.unary_width = 3;
  dims.pairwise_width = 2;
  dims.beta_width = 2;
  ModelOptions opts;
  opts.embedding_dropout = 0.0;
  opts.feature_dropout = 0.0;
  ModelKind kind = ModelKind::kSkipChain;
  if (target != GradientTarget::kSkipChain) {
    kind = seed % 2 == 0 ? ModelKind::kCrf : ModelKind::kCrfPair;
    dims.boundary_potentials = true;
    opts.objective =
        target == GradientTarget::kChainSequenceNll ? Objective::kSequenceNll : Objective::kMarginalCe;
  }
  SequenceModel<double> model(kind, dims, opts, labels);
  model.init(seed);
  auto params = model.parameters();
  for (auto* p : params)
    for (double& v : p->value.data) v = uniform(rng, -0.6, 0.6);
  const SequenceBatch batch = random_batch(rng, 2, 4, dims.vocab, labels.size());

  std::vector<double> point;
  for (auto* p : params) point.insert(point.end(), p->value.data.begin(), p->value.data.end());
  auto load = [&](std::span<const double> x) {
    std::size_t k = 0;
    for (auto* p : params)
      for (double& v : p->value.data) v = x[k++];
  };
  std::mt19937_64 unused(0);
  auto value = [&](std::span<const double> x) {
    load(x);
    Tape<double> tape;
    return model.loss(tape, batch, true, &unused).item();
  };
  auto gradient = [&](std::span<const double> x) {
    load(x);
    for (auto* p : params) p->zero_grad();
    Tape<double> tape;
    tape.backward(model.loss(tape, batch, true, &unused));
    std::vector<double> g;
    for (auto* p : params) g.insert(g.end(), p->grad.begin(), p->grad.end());
    return g;
  };
  return grad_check(value, gradient, point, 1e-5, 1e-4);
}

SuiteResult oracle_suite(const SelftestOptions& options) {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "chain-crf vs brute force";
  for (std::size_t i = 0; i < options.oracle_cases; ++i) {
    const std::uint64_t seed = derive_seed(options.seed, 10000 + i);
    std::mt19937_64 rng(seed);
    const std::size_t len = between(rng, 1, 6), l = between(rng, 1, 4);
    const auto pot = random_potentials(rng, len, l, rng() % 2 == 0);
    const auto oracle = brute_force_oracle(pot);
    ++r.cases;
    double err = std::abs(options.chain.log_partition(pot) - oracle.log_partition);
    const auto marg = options.chain.marginals(pot);
    if (marg.size() != oracle.marginals.size()) {
      record_failure(r, "chain-crf", seed, "marginal table has the wrong size");
      continue;
    }
    for (std::size_t k = 0; k < marg.size(); ++k) err = std::max(err, std::abs(marg[k] - oracle.marginals[k]));
    const auto best = options.chain.viterbi(pot);
    err = std::max(err, std::abs(best.score - oracle.best.score));
    r.worst = std::max(r.worst, err);
    if (best.path != oracle.best.path) {
      record_failure(r, "chain-crf", seed, "Viterbi path differs from enumeration");
    } else if (!(err <= 1e-8)) {
      record_failure(r, "chain-crf", seed, "error " + fmt(err) + " exceeds 1e-8");
    }
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

SuiteResult gradient_suite(GradientTarget target, const SelftestOptions& options) {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "gradient " + std::string(gradient_target_name(target));
  for (std::size_t i = 0; i < options.gradient_seeds; ++i) {
    const std::uint64_t seed = derive_seed(options.seed, 20000 + 1000 * static_cast<std::uint64_t>(target) + i);
    const auto report = check_loss_gradient(target, seed);
    ++r.cases;
    r.worst = std::max(r.worst, report.max_rel_error);
    if (report.nonfinite_index) {
      record_failure(r, "gradient", seed, "non-finite loss at coordinate " + std::to_string(*report.nonfinite_index));
    } else if (!report.passed) {
      record_failure(r, "gradient", seed,
                     "relative error " + fmt(report.max_rel_error) + " at coordinate " +
                         std::to_string(report.worst_index));
    }
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

SuiteResult normalization_suite(const SelftestOptions& options) {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "skip-chain normalization";
  for (std::size_t i = 0; i < options.normalization_seeds; ++i) {
    const std::uint64_t seed = derive_seed(options.seed, 30000 + i);
    std::mt19937_64 rng(seed);
    const std::size_t len = between(rng, 1, 7), l = between(rng, 2, 5);

    // reference mode over a full pair table
    SkipPairTable<double> pairs(len, l, len > 1 ? len - 1 : 0);
    for (double& v : pairs.scores) v = uniform(rng, -2, 2);
    std::vector<double> unary(len * l);
    for (double& v : unary) v = uniform(rng, -2, 2);
    auto msgs = beta_reference<double>(unary, pairs, between(rng, 1, len + 1));
    const auto marg = skip_marginals<double>(unary, msgs);
    double err = 0;
    for (std::size_t t = 0; t < len; ++t) {
      double row = 0;
      for (std::size_t y = 0; y < l; ++y) row += marg[t * l + y];
      err = std::max(err, std::abs(row - 1.0));
    }

    // recurrent mode on a padded batch
    const auto arrays = random_potential_arrays(rng, 2, len, l);
    auto est = random_estimator(rng, l, 3);
    Tape<double> tape;
    const auto pot = bind_potentials(tape, arrays, l);
    const auto logm = skip_log_marginals(pot, beta_recurrent(pot, est.bind(tape)));
    for (std::size_t t = 0; t < len; ++t) {
      const auto v = logm[t].value();
      for (std::size_t b = 0; b < 2; ++b) {
        if (arrays.mask(b, t) == 0.0) continue;
        double row = 0;
        for (std::size_t y = 0; y < l; ++y) row += std::exp(v[b * l + y]);
        err = std::max(err, std::abs(row - 1.0));
      }
    }
    ++r.cases;
    r.worst = std::max(r.worst, err);
    if (!(err <= 1e-9)) record_failure(r, "skipchain", seed, "row sum off by " + fmt(err));
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

SuiteResult exactness_suite(const SelftestOptions& options) {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "skip-chain exactness at T=2";
  for (std::size_t i = 0; i < options.normalization_seeds; ++i) {
    const std::uint64_t seed = derive_seed(options.seed, 40000 + i);
    std::mt19937_64 rng(seed);
    const std::size_t l = between(rng, 1, 5);
    const auto pot = random_potentials(rng, 2, l, rng() % 2 == 0);
    auto msgs = beta_reference<double>(pot.unary, SkipPairTable<double>::from_chain(pot), 1);
    const auto approx = skip_marginals<double>(pot.unary, msgs);
    const auto exact = options.chain.marginals(pot);
    double err = 0;
    for (std::size_t k = 0; k < approx.size() && k < exact.size(); ++k) {
      err = std::max(err, std::abs(approx[k] - exact[k]));
    }
    ++r.cases;
    r.worst = std::max(r.worst, err);
    if (exact.size() != approx.size() || !(err <= 1e-8)) {
      record_failure(r, "skipchain", seed, "marginals differ from exact chain marginals by " + fmt(err));
    }
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

SuiteResult directionality_suite(const SelftestOptions& options) {
  const auto start = Clock::now();
  SuiteResult r;
  r.name = "skip-chain message directionality";
  for (std::size_t i = 0; i < options.direction_probes; ++i) {
    const std::uint64_t seed = derive_seed(options.seed, 50000 + i);
    std::mt19937_64 rng(seed);
    const std::size_t len = between(rng, 2, 7), l = between(rng, 2, 4), rows = 2;
    auto arrays = random_potential_arrays(rng, rows, len, l);
    auto est = random_estimator(rng, l, 3);
    const std::size_t b = between(rng, 0, rows - 1);
    std::size_t first = 0;
    while (arrays.mask(b, first) == 0.0) ++first;
    const std::size_t j = between(rng, first, len - 1);

    auto messages = [&](const RandomPotentials& a) {
      Tape<double> tape;
      const auto pot = bind_potentials(tape, a, l);
      const auto m = beta_recurrent(pot, est.bind(tape));
      std::vector<std::vector<double>> left, right;
      for (std::size_t t = 0; t < len; ++t) {
        auto lv = m.left[t].value().subspan(b * l, l);
        auto rv = m.right[t].value().subspan(b * l, l);
        left.emplace_back(lv.begin(), lv.end());
        right.emplace_back(rv.begin(), rv.end());
      }
      return std::pair{left, right};
    };
    const auto before = messages(arrays);
    for (std::size_t y = 0; y < l; ++y) arrays.unary[j](b, y) += uniform(rng, 0.5, 1.5);
    if (j + 1 < len)
      for (std::size_t k = 0; k < l * l; ++k) arrays.pairwise[j].data[b * l * l + k] += uniform(rng, 0.5, 1.5);
    const auto after = messages(arrays);

    ++r.cases;
    std::string problem;
    for (std::size_t t = first; t < len && problem.empty(); ++t) {
      const bool left_same = before.first[t] == after.first[t];
      const bool right_same = before.second[t] == after.second[t];
      if (t <= j && !left_same) problem = "left message at " + std::to_string(t) + " moved after perturbing " + std::to_string(j);
      if (t >= j && !right_same) problem = "right message at " + std::to_string(t) + " moved after perturbing " + std::to_string(j);
      if (t == j + 1 && left_same) problem = "left message at " + std::to_string(t) + " ignores position " + std::to_string(j);
      if (t + 1 == j && right_same) problem = "right message at " + std::to_string(t) + " ignores position " + std::to_string(j);
    }
    if (!problem.empty()) record_failure(r, "skipchain", seed, problem);
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

SelftestReport run_selftest(const SelftestOptions& options) {
  SelftestReport report;
  report.suites.push_back(oracle_suite(options));
  report.suites.push_back(gradient_suite(GradientTarget::kChainMarginalCe, options));
  report.suites.push_back(gradient_suite(GradientTarget::kChainSequenceNll, options));
  report.suites.push_back(gradient_suite(GradientTarget::kSkipChain, options));
  report.suites.push_back(normalization_suite(options));
  report.suites.push_back(exactness_suite(options));
  report.suites.push_back(directionality_suite(options));
  return report;
}

}  // namespace seqcrf
