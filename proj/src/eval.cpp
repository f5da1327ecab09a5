#include "seqcrf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace seqcrf {

double Counts::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
double Counts::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }
double Counts::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

namespace {

std::size_t slot(Category c) { return static_cast<std::size_t>(c); }

std::vector<Span> checked_sorted(std::span<const Span> spans, const char* which) {
  std::vector<Span> out(spans.begin(), spans.end());
  std::sort(out.begin(), out.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].start < 0 || out[i].end < out[i].start) {
      throw std::invalid_argument(std::string(which) + " span [" + std::to_string(out[i].start) + ", " +
                                  std::to_string(out[i].end) + "] is malformed");
    }
    if (i > 0 && out[i].start <= out[i - 1].end) {
      throw std::invalid_argument(std::string(which) + " spans overlap at token " + std::to_string(out[i].start));
    }
  }
  return out;
}

std::vector<int> token_categories(std::span<const Span> spans, std::size_t length) {
  std::vector<int> out(length, -1);
  for (const auto& sp : spans) {
    if (static_cast<std::size_t>(sp.end) >= length) {
      throw std::invalid_argument("span ends at " + std::to_string(sp.end) + " in a sentence of length " +
                                  std::to_string(length));
    }
    for (int t = sp.start; t <= sp.end; ++t) out[static_cast<std::size_t>(t)] = static_cast<int>(sp.category);
  }
  return out;
}

CategoryCounts compare_tokens(const std::vector<int>& gold, const std::vector<int>& pred) {
  CategoryCounts c{};
  for (std::size_t t = 0; t < gold.size(); ++t) {
    const int g = gold[t], p = pred[t];
    if (g >= 0 && g == p) {
      ++c[static_cast<std::size_t>(g)].tp;
      continue;
    }
    if (p >= 0) ++c[static_cast<std::size_t>(p)].fp;
    if (g >= 0) ++c[static_cast<std::size_t>(g)].fn;
  }
  return c;
}

}  // namespace

CategoryCounts strict_phrase_counts(std::span<const Span> gold, std::span<const Span> predicted) {
  const auto g = checked_sorted(gold, "gold");
  const auto p = checked_sorted(predicted, "predicted");
  CategoryCounts c{};
  std::size_t i = 0, j = 0;
  while (i < g.size() || j < p.size()) {
    if (j == p.size() || (i < g.size() && g[i] < p[j])) {
      ++c[slot(g[i++].category)].fn;
    } else if (i == g.size() || p[j] < g[i]) {
      ++c[slot(p[j++].category)].fp;
    } else {
      ++c[slot(g[i].category)].tp;
      ++i;
      ++j;
    }
  }
  return c;
}

CategoryCounts relaxed_word_counts(std::span<const int> gold, std::span<const int> predicted,
                                   const LabelSpace& labels) {
  if (gold.size() != predicted.size()) {
    throw std::invalid_argument("relaxed metrics: gold has " + std::to_string(gold.size()) +
                                " labels, prediction has " + std::to_string(predicted.size()));
  }
  auto categories = [&](std::span<const int> seq) {
    std::vector<int> out(seq.size(), -1);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (seq[t] < 0 || static_cast<std::size_t>(seq[t]) >= labels.size()) {
        throw std::invalid_argument("label " + std::to_string(seq[t]) + " outside the label space");
      }
      if (auto c = labels.category_of(seq[t])) out[t] = static_cast<int>(*c);
    }
    return out;
  };
  return compare_tokens(categories(gold), categories(predicted));
}

CategoryCounts relaxed_span_counts(std::span<const Span> gold, std::span<const Span> predicted,
                                   std::size_t length) {
  checked_sorted(gold, "gold");
  checked_sorted(predicted, "predicted");
  return compare_tokens(token_categories(gold, length), token_categories(predicted, length));
}

Counts micro_average(std::span<const Counts> per_category) {
  Counts total;
  for (const auto& c : per_category) total += c;
  return total;
}

MetricReport& MetricReport::operator+=(const MetricReport& o) {
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    strict[i] += o.strict[i];
    relaxed[i] += o.relaxed[i];
  }
  return *this;
}

MetricReport evaluate(std::span<const SentencePrediction> sentences) {
  MetricReport r;
  for (const auto& s : sentences) {
    const auto strict = strict_phrase_counts(s.gold, s.predicted);
    const auto relaxed = relaxed_span_counts(s.gold, s.predicted, s.length);
    for (std::size_t i = 0; i < kNumCategories; ++i) {
      r.strict[i] += strict[i];
      r.relaxed[i] += relaxed[i];
    }
  }
  return r;
}

namespace {

nlohmann::json counts_json(const Counts& c) {
  return {{"tp", c.tp},
          {"fp", c.fp},
          {"fn", c.fn},
          {"precision", c.precision()},
          {"recall", c.recall()},
          {"f1", c.f1()}};
}

nlohmann::json block_json(const CategoryCounts& counts) {
  nlohmann::json per = nlohmann::json::object();
  for (Category c : kAllCategories) per[std::string(category_name(c))] = counts_json(counts[slot(c)]);
  return {{"micro", counts_json(micro_average(counts))}, {"categories", per}};
}

CategoryCounts block_from_json(const nlohmann::json& j) {
  CategoryCounts out{};
  for (Category c : kAllCategories) {
    const auto& e = j.at("categories").at(std::string(category_name(c)));
    out[slot(c)] = {e.at("tp").get<std::size_t>(), e.at("fp").get<std::size_t>(), e.at("fn").get<std::size_t>()};
  }
  return out;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j = {{"strict", block_json(strict)}, {"relaxed", block_json(relaxed)}};
  if (fold) j["fold"] = *fold;
  return j;
}

MetricReport MetricReport::from_json(const nlohmann::json& j) {
  MetricReport r;
  r.strict = block_from_json(j.at("strict"));
  r.relaxed = block_from_json(j.at("relaxed"));
  if (j.contains("fold")) r.fold = j.at("fold").get<std::size_t>();
  return r;
}

std::string format_table(std::span<const std::pair<std::string, MetricReport>> rows) {
  std::size_t name_width = 6;
  for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  std::string out;
  out += pad("", name_width) + " | Strict (exact match)       | Relaxed (word based)\n";
  out += pad("Model", name_width) + " | Recall  Precision F-score | Recall  Precision F-score\n";
  out += std::string(name_width, '-') + "-+---------------------------+--------------------------\n";
  for (const auto& [name, rep] : rows) {
    const Counts s = rep.strict_micro(), r = rep.relaxed_micro();
    out += pad(name, name_width) + " | " + fixed(s.recall()) + "  " + fixed(s.precision()) + "    " +
           fixed(s.f1()) + "  | " + fixed(r.recall()) + "  " + fixed(r.precision()) + "    " + fixed(r.f1()) +
           "\n";
  }
  return out;
}

std::string format_report(const MetricReport& report) {
  std::vector<std::pair<std::string, MetricReport>> rows;
  for (Category c : kAllCategories) {
    MetricReport one;
    one.strict[slot(c)] = report.strict[slot(c)];
    one.relaxed[slot(c)] = report.relaxed[slot(c)];
    rows.emplace_back(std::string(category_name(c)), one);
  }
  rows.emplace_back("micro", report);
  return format_table(rows);
}

// ---------------------------------------------------------------- t-test

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw std::invalid_argument("incomplete_beta needs positive a and b");
  if (x < 0 || x > 1) throw std::invalid_argument("incomplete_beta needs x in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double dof) {
  if (dof <= 0) throw std::invalid_argument("student t needs positive degrees of freedom");
  if (std::isnan(t)) return std::nan("");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * dof, 0.5, dof / (dof + t * t));
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("paired t-test: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                " scores");
  }
  if (a.size() < 2) throw std::invalid_argument("paired t-test needs at least 2 pairs");
  TTestResult r;
  r.n = a.size();
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  double mean = 0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(r.n);
  double ss = 0;
  for (double v : d) ss += (v - mean) * (v - mean);
  r.mean_difference = mean;
  const double var = ss / static_cast<double>(r.n - 1);
  // Constant differences: round-off in the mean can leave a residue of a few ulps.
  const double scale = std::max(std::abs(mean), 1e-300);
  if (var <= 1e-28 * scale * scale || ss == 0.0) {
    if (mean == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.degenerate = true;
      r.t = mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
    }
    return r;
  }
  r.t = mean / std::sqrt(var / static_cast<double>(r.n));
  r.p = student_t_two_sided(r.t, static_cast<double>(r.n - 1));
  return r;
}

}  // namespace seqcrf
