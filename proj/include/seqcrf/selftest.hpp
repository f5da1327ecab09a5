#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "seqcrf/chain_crf.hpp"
#include "seqcrf/grad_check.hpp"
#include "seqcrf/model.hpp"

namespace seqcrf {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;                 // largest error observed
  std::vector<std::string> details;   // "<module> seed <s>: <what>" per failure (first few)
  double seconds = 0.0;

  bool passed() const { return failures == 0 && cases > 0; }
};

struct SelftestReport {
  std::vector<SuiteResult> suites;

  bool passed() const;
  std::string summary() const;
};

// Exact chain inference routines under test.
struct ChainImplementation {
  std::function<double(const PotentialTable<double>&)> log_partition;
  std::function<std::vector<double>(const PotentialTable<double>&)> marginals;
  std::function<ViterbiResult<double>(const PotentialTable<double>&)> viterbi;

  static ChainImplementation reference();
};

struct SelftestOptions {
  std::uint64_t seed = 1;
  std::size_t oracle_cases = 1000;
  std::size_t gradient_seeds = 50;
  std::size_t normalization_seeds = 100;
  std::size_t direction_probes = 100;
  ChainImplementation chain = ChainImplementation::reference();
};

// Uniform(-scale, scale) potentials.
PotentialTable<double> random_potentials(std::mt19937_64& rng, std::size_t length, std::size_t labels, bool shared,
                                         double scale = 2.0);

enum class GradientTarget { kChainMarginalCe, kChainSequenceNll, kSkipChain };
std::string_view gradient_target_name(GradientTarget t);

// Finite-difference check of a loss over every parameter of a tiny random
// model (64-bit, epsilon 1e-5, tolerance 1e-4).
GradCheckReport check_loss_gradient(GradientTarget target, std::uint64_t seed);

SuiteResult oracle_suite(const SelftestOptions& options);
SuiteResult gradient_suite(GradientTarget target, const SelftestOptions& options);
SuiteResult normalization_suite(const SelftestOptions& options);
SuiteResult exactness_suite(const SelftestOptions& options);
SuiteResult directionality_suite(const SelftestOptions& options);

SelftestReport run_selftest(const SelftestOptions& options = {});

}  // namespace seqcrf
