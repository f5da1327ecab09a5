#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqcrf/labels.hpp"

namespace seqcrf {

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  // Zero when the denominator is zero.
  double precision() const;
  double recall() const;
  // 2PR / (P + R), zero when P + R = 0.
  double f1() const;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

using CategoryCounts = std::array<Counts, kNumCategories>;

// Exact (start, end, category) matches. Throws std::invalid_argument when
// either set contains overlapping spans.
CategoryCounts strict_phrase_counts(std::span<const Span> gold, std::span<const Span> predicted);

// Per-token category comparison with B/I stripped; O never counts as a hit.
// Throws std::invalid_argument on length mismatch.
CategoryCounts relaxed_word_counts(std::span<const int> gold, std::span<const int> predicted,
                                   const LabelSpace& labels);

// Same comparison from spans over a sentence of `length` tokens.
CategoryCounts relaxed_span_counts(std::span<const Span> gold, std::span<const Span> predicted,
                                   std::size_t length);

Counts micro_average(std::span<const Counts> per_category);

struct MetricReport {
  std::optional<std::size_t> fold;
  CategoryCounts strict{};
  CategoryCounts relaxed{};

  Counts strict_micro() const { return micro_average(strict); }
  Counts relaxed_micro() const { return micro_average(relaxed); }
  MetricReport& operator+=(const MetricReport& o);

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

struct SentencePrediction {
  std::size_t length = 0;
  std::vector<Span> gold;
  std::vector<Span> predicted;
};

MetricReport evaluate(std::span<const SentencePrediction> sentences);

// Aligned text table with a strict and a relaxed block of recall, precision
// and F-score, one row per named report (micro-averaged).
std::string format_table(std::span<const std::pair<std::string, MetricReport>> rows);
// Per-category rows followed by the micro average.
std::string format_report(const MetricReport& report);

struct TTestResult {
  std::size_t n = 0;
  double mean_difference = 0.0;
  double t = 0.0;
  double p = 1.0;
  bool degenerate = false;  // differences constant and non-zero: infinite t, p = 0
};

// Paired two-sided t-test on a - b with n - 1 degrees of freedom. Identical
// inputs give t = 0, p = 1.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

// Two-sided tail probability P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided(double t, double dof);
// Regularised incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

}  // namespace seqcrf
