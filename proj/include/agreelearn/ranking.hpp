#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agreelearn/dataset.hpp"
#include "agreelearn/error.hpp"
#include "agreelearn/evaluation.hpp"
#include "agreelearn/learners/learner.hpp"
#include "agreelearn/parallel.hpp"

namespace agreelearn {

enum class Evaluator { svm_rfe, chi_squared, info_gain };

inline std::string_view to_string(Evaluator e) {
  switch (e) {
    case Evaluator::svm_rfe: return "svm_rfe";
    case Evaluator::chi_squared: return "chi_squared";
    case Evaluator::info_gain: return "info_gain";
  }
  return "?";
}

inline Evaluator parse_evaluator(std::string_view s) {
  for (auto e : {Evaluator::svm_rfe, Evaluator::chi_squared, Evaluator::info_gain})
    if (to_string(e) == s) return e;
  throw PreconditionError("unknown evaluator '" + std::string(s) + "'");
}

struct RankerSpec {
  Evaluator evaluator = Evaluator::svm_rfe;
  double c = 1.0;   // svm_rfe
  int n_bins = 10;  // chi_squared, info_gain

  auto operator<=>(const RankerSpec&) const = default;
};

/// Attribute indices best first; scores[i] belongs to order[i].
struct Ranking {
  std::string evaluator;
  std::vector<std::size_t> order;
  std::vector<double> scores;
};

/// Sorts by descending score; equal scores keep the lower attribute index first.
inline Ranking ranking_from_scores(std::string evaluator, std::span<const double> per_attribute) {
  Ranking r;
  r.evaluator = std::move(evaluator);
  r.order.resize(per_attribute.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return per_attribute[a] > per_attribute[b]; });
  for (auto i : r.order) r.scores.push_back(per_attribute[i]);
  return r;
}

namespace detail {

inline void require_rankable(const Dataset& d, std::size_t min_samples) {
  d.label_vector();
  if (d.has_missing()) throw PreconditionError("ranking requires a dataset without missing values");
  if (d.n_samples() < min_samples)
    throw PreconditionError("ranking needs at least " + std::to_string(min_samples) + " samples");
}

}  // namespace detail

/// Recursive feature elimination: fit a linear SVM on the surviving
/// attributes, drop the one with the smallest squared weight (the higher index
/// on ties), repeat. Score = elimination round, so later survivors score higher.
inline Ranking rank_svm_rfe(const Dataset& d, double c = 1.0) {
  detail::require_rankable(d, 4);
  const LearnerSpec svm{LearnerKind::svm_smo, {{"C", c}}, 0};
  std::vector<std::size_t> surviving(d.n_attributes());
  std::iota(surviving.begin(), surviving.end(), std::size_t{0});
  std::vector<double> score(d.n_attributes(), 0.0);
  std::size_t round = 0;
  while (surviving.size() > 1) {
    const auto model = fit(svm, d, surviving);
    const auto& w = std::get<LinearParameters>(model.parameters()).weights;
    std::size_t drop = 0;
    for (std::size_t i = 1; i < surviving.size(); ++i) {
      const double wi = w(static_cast<Eigen::Index>(i)) * w(static_cast<Eigen::Index>(i));
      const double wd = w(static_cast<Eigen::Index>(drop)) * w(static_cast<Eigen::Index>(drop));
      if (wi <= wd) drop = i;  // surviving is ascending, so <= prefers the higher index
    }
    score[surviving[drop]] = static_cast<double>(round++);
    surviving.erase(surviving.begin() + static_cast<std::ptrdiff_t>(drop));
  }
  if (!surviving.empty()) score[surviving.front()] = static_cast<double>(round);
  return ranking_from_scores("svm_rfe", score);
}

/// Equal-frequency discretization. Cut points are the order statistics at
/// multiples of n/n_bins; equal values always share a bin, so there may be
/// fewer than n_bins bins. Depends only on the order of the values.
inline std::vector<int> equal_frequency_bins(std::span<const double> column, int n_bins) {
  if (n_bins < 1) throw PreconditionError("n_bins must be >= 1");
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> cuts;
  for (int b = 1; b < n_bins; ++b) {
    const std::size_t at = static_cast<std::size_t>(b) * n / static_cast<std::size_t>(n_bins);
    if (at < n && (cuts.empty() || sorted[at] != cuts.back())) cuts.push_back(sorted[at]);
  }
  std::vector<int> bins;
  bins.reserve(n);
  for (double v : column)
    bins.push_back(static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin()));
  return bins;
}

/// Pearson chi-squared statistic of the bin x class contingency table.
inline double chi_squared_statistic(std::span<const int> bins, std::span<const int> labels) {
  std::map<int, std::array<double, 2>> table;
  double col[2] = {0, 0};
  for (std::size_t i = 0; i < bins.size(); ++i) {
    table[bins[i]][static_cast<std::size_t>(labels[i])] += 1;
    col[labels[i]] += 1;
  }
  const double n = static_cast<double>(bins.size());
  double chi = 0.0;
  for (const auto& [bin, counts] : table) {
    const double row = counts[0] + counts[1];
    for (int c = 0; c < 2; ++c) {
      const double expected = row * col[c] / n;
      if (expected > 0) chi += (counts[static_cast<std::size_t>(c)] - expected) *
                               (counts[static_cast<std::size_t>(c)] - expected) / expected;
    }
  }
  return chi;
}

/// H(Y) - H(Y | bin), in bits.
inline double information_gain(std::span<const int> bins, std::span<const int> labels) {
  auto entropy = [](double a, double b) {
    double h = 0.0;
    for (double c : {a, b})
      if (c > 0) h -= c / (a + b) * std::log2(c / (a + b));
    return h;
  };
  std::map<int, std::array<double, 2>> table;
  double col[2] = {0, 0};
  for (std::size_t i = 0; i < bins.size(); ++i) {
    table[bins[i]][static_cast<std::size_t>(labels[i])] += 1;
    col[labels[i]] += 1;
  }
  const double n = static_cast<double>(bins.size());
  double conditional = 0.0;
  for (const auto& [bin, counts] : table) conditional += (counts[0] + counts[1]) / n * entropy(counts[0], counts[1]);
  return std::max(0.0, entropy(col[0], col[1]) - conditional);
}

namespace detail {

template <class Score>
Ranking rank_by_bins(const Dataset& d, int n_bins, std::string name, Score&& score) {
  require_rankable(d, static_cast<std::size_t>(std::max(1, n_bins)));
  const auto& labels = d.label_vector();
  std::vector<double> scores(d.n_attributes());
  std::vector<double> column(d.n_samples());
  for (std::size_t j = 0; j < d.n_attributes(); ++j) {
    for (std::size_t i = 0; i < d.n_samples(); ++i)
      column[i] = d.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    scores[j] = score(equal_frequency_bins(column, n_bins), labels);
  }
  return ranking_from_scores(std::move(name), scores);
}

}  // namespace detail

inline Ranking rank_chi_squared(const Dataset& d, int n_bins = 10) {
  return detail::rank_by_bins(d, n_bins, "chi_squared",
                              [](const auto& b, const auto& l) { return chi_squared_statistic(b, l); });
}

inline Ranking rank_info_gain(const Dataset& d, int n_bins = 10) {
  return detail::rank_by_bins(d, n_bins, "info_gain",
                              [](const auto& b, const auto& l) { return information_gain(b, l); });
}

inline Ranking rank(const Dataset& d, const RankerSpec& spec) {
  switch (spec.evaluator) {
    case Evaluator::svm_rfe: return rank_svm_rfe(d, spec.c);
    case Evaluator::chi_squared: return rank_chi_squared(d, spec.n_bins);
    case Evaluator::info_gain: return rank_info_gain(d, spec.n_bins);
  }
  throw UnsupportedOperation("unhandled evaluator");
}

enum class RankEnd { best, worst };

inline std::string_view to_string(RankEnd e) { return e == RankEnd::best ? "best" : "worst"; }

inline RankEnd parse_rank_end(std::string_view s) {
  if (s == "best") return RankEnd::best;
  if (s == "worst") return RankEnd::worst;
  throw PreconditionError("rank end must be 'best' or 'worst', got '" + std::string(s) + "'");
}

inline std::vector<std::size_t> select_best_k(const Ranking& r, std::size_t k) {
  if (k < 1 || k > r.order.size())
    throw PreconditionError("k=" + std::to_string(k) + " outside 1.." + std::to_string(r.order.size()));
  return {r.order.begin(), r.order.begin() + static_cast<std::ptrdiff_t>(k)};
}

/// Last k entries, worst first.
inline std::vector<std::size_t> select_worst_k(const Ranking& r, std::size_t k) {
  if (k < 1 || k > r.order.size())
    throw PreconditionError("k=" + std::to_string(k) + " outside 1.." + std::to_string(r.order.size()));
  return {r.order.rbegin(), r.order.rbegin() + static_cast<std::ptrdiff_t>(k)};
}

inline std::vector<std::size_t> select_k(const Ranking& r, RankEnd end, std::size_t k) {
  return end == RankEnd::best ? select_best_k(r, k) : select_worst_k(r, k);
}

/// Accuracy of every (evaluator, learner) pair using the evaluator's best k
/// attributes; ranking is redone on each training split.
struct EvaluatorGrid {
  std::vector<std::string> evaluators;
  std::vector<std::string> learners;
  std::vector<std::vector<double>> accuracy;  // [evaluator][learner]
  std::vector<std::size_t> winner;            // per learner: evaluator index, ties to the lower index
};

inline EvaluatorGrid compare_evaluators(const Dataset& d, const std::vector<RankerSpec>& rankers,
                                        const std::vector<LearnerSpec>& learners, std::size_t k, const CVSpec& cv) {
  EvaluatorGrid grid;
  for (const auto& r : rankers) grid.evaluators.emplace_back(to_string(r.evaluator));
  for (const auto& l : learners) grid.learners.emplace_back(to_string(l.kind));
  grid.accuracy.assign(rankers.size(), std::vector<double>(learners.size(), 0.0));
  parallel_for(rankers.size() * learners.size(), [&](std::size_t cell) {
    const auto& ranker = rankers[cell / learners.size()];
    const auto& learner = learners[cell % learners.size()];
    const auto table = pooled_cv(d, cv, [&](const Dataset& train, const Dataset& test, std::size_t) {
      const auto features = select_best_k(rank(train, ranker), std::min(k, train.n_attributes()));
      return predict_all(fit(learner, train, features), test);
    });
    grid.accuracy[cell / learners.size()][cell % learners.size()] = table.accuracy();
  });
  for (std::size_t l = 0; l < learners.size(); ++l) {
    std::size_t best = 0;
    for (std::size_t e = 1; e < rankers.size(); ++e)
      if (grid.accuracy[e][l] > grid.accuracy[best][l]) best = e;
    grid.winner.push_back(best);
  }
  return grid;
}

}  // namespace agreelearn
