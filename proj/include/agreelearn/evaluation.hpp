#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "agreelearn/dataset.hpp"
#include "agreelearn/error.hpp"
#include "agreelearn/parallel.hpp"

namespace agreelearn {

enum class CVKind { kfold, loo };

struct CVSpec {
  CVKind kind = CVKind::kfold;
  int k = 10;
  std::uint64_t seed = 0;
  bool stratified = true;

  static CVSpec kfold(int k, std::uint64_t seed = 0, bool stratified = true) {
    return {CVKind::kfold, k, seed, stratified};
  }
  static CVSpec loo() { return {CVKind::loo, 0, 0, false}; }

  /// "kfold:N" or "loo".
  static CVSpec parse(std::string_view text, std::uint64_t seed = 0) {
    if (text == "loo") return loo();
    if (text.starts_with("kfold:")) {
      auto v = detail::parse_double(text.substr(6));
      if (v && *v >= 2 && *v == std::floor(*v)) return kfold(static_cast<int>(*v), seed);
    }
    throw PreconditionError("cross-validation must be 'kfold:N' (N >= 2) or 'loo', got '" +
                            std::string(text) + "'");
  }

  std::string to_string() const { return kind == CVKind::loo ? "loo" : "kfold:" + std::to_string(k); }
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Deterministic partition of 0..n-1. Stratified k-fold deals each class's
/// shuffled members round-robin, so per-fold class counts differ by at most one.
inline std::vector<Fold> make_folds(std::size_t n, std::span<const int> labels, const CVSpec& cv) {
  std::vector<std::size_t> assignment(n);
  std::size_t n_folds;
  if (cv.kind == CVKind::loo) {
    n_folds = n;
    std::iota(assignment.begin(), assignment.end(), std::size_t{0});
  } else {
    if (cv.k < 2) throw PreconditionError("k-fold needs k >= 2");
    n_folds = static_cast<std::size_t>(cv.k);
    if (n < n_folds)
      throw PreconditionError("cannot split " + std::to_string(n) + " samples into " +
                              std::to_string(n_folds) + " folds");
    std::mt19937_64 rng(cv.seed);
    std::vector<std::size_t> dealt;
    if (cv.stratified && labels.size() == n) {
      for (int cls : {0, 1}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < n; ++i)
          if (labels[i] == cls) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        dealt.insert(dealt.end(), members.begin(), members.end());
      }
    } else {
      dealt.resize(n);
      std::iota(dealt.begin(), dealt.end(), std::size_t{0});
      std::shuffle(dealt.begin(), dealt.end(), rng);
    }
    for (std::size_t p = 0; p < n; ++p) assignment[dealt[p]] = p % n_folds;
  }
  std::vector<Fold> folds(n_folds);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < n_folds; ++f) (assignment[i] == f ? folds[f].test : folds[f].train).push_back(i);
  return folds;
}

namespace detail {

inline bool has_single_class_training(const std::vector<Fold>& folds, std::span<const int> labels) {
  for (const auto& f : folds) {
    bool seen[2] = {false, false};
    for (auto i : f.train) seen[labels[i]] = true;
    if (!(seen[0] && seen[1])) return true;
  }
  return false;
}

}  // namespace detail

/// Folds for a labeled dataset. If some training split holds a single class,
/// the partition is re-drawn once from a derived seed before giving up.
inline std::vector<Fold> checked_folds(const Dataset& d, const CVSpec& cv) {
  const auto& labels = d.label_vector();
  auto folds = make_folds(d.n_samples(), labels, cv);
  if (!detail::has_single_class_training(folds, labels)) return folds;
  if (cv.kind == CVKind::kfold) {
    CVSpec redraw = cv;
    redraw.seed = derive_seed(cv.seed, 0x7265647261770000ULL);
    folds = make_folds(d.n_samples(), labels, redraw);
    if (!detail::has_single_class_training(folds, labels)) return folds;
  }
  throw PreconditionError("cross-validation produced a training split with a single class");
}

/// Calls fn(train, test, fold_index) for every fold, possibly concurrently,
/// and returns the per-fold results in fold order.
template <class Fn>
auto map_folds(const Dataset& d, const std::vector<Fold>& folds, Fn&& fn) {
  using Result = std::invoke_result_t<Fn&, const Dataset&, const Dataset&, std::size_t>;
  std::vector<std::optional<Result>> slots(folds.size());
  parallel_for(folds.size(), [&](std::size_t f) {
    const Dataset train = d.subset_rows(folds[f].train);
    const Dataset test = d.subset_rows(folds[f].test);
    slots[f].emplace(fn(train, test, f));
  });
  std::vector<Result> out;
  out.reserve(folds.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// One held-out prediction per sample.
struct PredictionTable {
  std::vector<int> prediction;
  std::vector<int> label;
  std::vector<std::size_t> fold;
  std::vector<Fold> folds;

  std::size_t n_total() const { return prediction.size(); }
  std::size_t n_correct() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < prediction.size(); ++i) c += prediction[i] == label[i];
    return c;
  }
  double accuracy() const { return n_total() ? static_cast<double>(n_correct()) / n_total() : 0.0; }

  std::vector<double> fold_accuracies() const {
    std::vector<double> acc;
    for (const auto& f : folds) {
      std::size_t c = 0;
      for (auto i : f.test) c += prediction[i] == label[i];
      acc.push_back(f.test.empty() ? 0.0 : static_cast<double>(c) / f.test.size());
    }
    return acc;
  }
};

/// fn(train, test, fold) returns one class per test row. Any fitting,
/// feature selection or orientation choice happens inside fn on `train` only.
template <class Fn>
PredictionTable pooled_cv(const Dataset& d, const CVSpec& cv, Fn&& fn) {
  PredictionTable table;
  table.folds = checked_folds(d, cv);
  auto per_fold = map_folds(d, table.folds, fn);
  const std::size_t n = d.n_samples();
  table.prediction.assign(n, -1);
  table.fold.assign(n, 0);
  table.label = d.label_vector();
  for (std::size_t f = 0; f < table.folds.size(); ++f) {
    const auto& test = table.folds[f].test;
    const std::vector<int>& preds = per_fold[f];
    if (preds.size() != test.size()) throw Error("fold predictor returned the wrong number of predictions");
    for (std::size_t t = 0; t < test.size(); ++t) {
      table.prediction[test[t]] = preds[t];
      table.fold[test[t]] = f;
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Metrics

inline double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw PreconditionError("prediction/label length mismatch");
  if (labels.empty()) throw PreconditionError("accuracy of an empty prediction set");
  std::size_t c = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) c += predictions[i] == labels[i];
  return static_cast<double>(c) / labels.size();
}

struct SelectiveMetrics {
  double coverage = 0.0;
  std::optional<double> accuracy;  // over non-abstained samples; empty when coverage is 0
  std::size_t n_covered = 0;
  std::size_t n_correct = 0;
};

/// nullopt entries are abstentions.
inline SelectiveMetrics selective_metrics(std::span<const std::optional<int>> predictions,
                                          std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw PreconditionError("prediction/label length mismatch");
  SelectiveMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!predictions[i]) continue;
    ++m.n_covered;
    m.n_correct += *predictions[i] == labels[i];
  }
  if (!labels.empty()) m.coverage = static_cast<double>(m.n_covered) / labels.size();
  if (m.n_covered) m.accuracy = static_cast<double>(m.n_correct) / m.n_covered;
  return m;
}

/// Exact two-sided binomial test: total probability of outcomes no more
/// likely than the observed count.
inline double binomial_test(long successes, long trials, double p0 = 0.5) {
  if (trials < 1 || successes < 0 || successes > trials || !(p0 > 0.0 && p0 < 1.0))
    throw PreconditionError("binomial_test requires 0 <= successes <= trials, trials >= 1, 0 < p0 < 1");
  const double lp = std::log(p0), lq = std::log1p(-p0);
  auto log_pmf = [&](long k) {
    return std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) + k * lp +
           (trials - k) * lq;
  };
  const double observed = log_pmf(successes);
  // Relative slack so symmetric outcomes that differ only by rounding are counted.
  const double cutoff = observed + std::log1p(1e-7);
  double p = 0.0;
  for (long k = 0; k <= trials; ++k) {
    const double lk = log_pmf(k);
    if (lk <= cutoff) p += std::exp(lk);
  }
  return std::min(1.0, p);
}

}  // namespace agreelearn
