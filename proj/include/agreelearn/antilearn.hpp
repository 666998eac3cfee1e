#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agreelearn/dataset.hpp"
#include "agreelearn/error.hpp"
#include "agreelearn/evaluation.hpp"
#include "agreelearn/learners/learner.hpp"
#include "agreelearn/parallel.hpp"
#include "agreelearn/ranking.hpp"

namespace agreelearn {

/// Same fitted state, opposite orientation.
inline TrainedModel invert(const TrainedModel& m) { return m.inverted(); }

enum class Verdict { learnable, anti_learnable, chance };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::learnable: return "learnable";
    case Verdict::anti_learnable: return "anti_learnable";
    case Verdict::chance: return "chance";
  }
  return "?";
}

inline Verdict classify_verdict(double accuracy, double p_value, double alpha) {
  if (p_value < alpha && accuracy < 0.5) return Verdict::anti_learnable;
  if (p_value < alpha && accuracy > 0.5) return Verdict::learnable;
  return Verdict::chance;
}

struct AntiLearnReport {
  double cv_accuracy = 0.0;
  std::size_t n_correct = 0;
  std::size_t n_total = 0;
  double p_value = 1.0;  // exact two-sided binomial against 0.5
  Verdict verdict = Verdict::chance;
  double alpha = 0.05;
  PredictionTable predictions;
};

inline std::vector<std::size_t> all_features(const Dataset& d) {
  std::vector<std::size_t> f(d.n_attributes());
  std::iota(f.begin(), f.end(), std::size_t{0});
  return f;
}

/// Pooled held-out predictions of `spec` trained on a fixed attribute subset.
inline PredictionTable cross_validate(const LearnerSpec& spec, const Dataset& d, std::span<const std::size_t> features,
                                      const CVSpec& cv) {
  return pooled_cv(d, cv, [&](const Dataset& train, const Dataset& test, std::size_t) {
    return predict_all(fit(spec, train, features), test);
  });
}

inline AntiLearnReport report_from_table(PredictionTable table, double alpha) {
  AntiLearnReport r;
  r.n_total = table.n_total();
  r.n_correct = table.n_correct();
  r.cv_accuracy = table.accuracy();
  r.p_value = binomial_test(static_cast<long>(r.n_correct), static_cast<long>(r.n_total));
  r.alpha = alpha;
  r.verdict = classify_verdict(r.cv_accuracy, r.p_value, alpha);
  r.predictions = std::move(table);
  return r;
}

inline AntiLearnReport diagnose(const LearnerSpec& spec, const Dataset& d, std::span<const std::size_t> features,
                                const CVSpec& cv, double alpha = 0.05) {
  const auto& labels = d.label_vector();
  const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (ones < 2 || labels.size() - ones < 2) throw PreconditionError("diagnose needs at least 2 samples per class");
  return report_from_table(cross_validate(spec, d, features, cv), alpha);
}

inline AntiLearnReport diagnose(const LearnerSpec& spec, const Dataset& d, const CVSpec& cv, double alpha = 0.05) {
  return diagnose(spec, d, all_features(d), cv, alpha);
}

struct SweepEntry {
  std::size_t k = 0;
  std::vector<std::size_t> features;
  std::size_t n_correct = 0;
  std::size_t n_total = 0;
  double accuracy = 0.0;
  std::optional<TrainedModel> model;  // fitted on the whole dataset with `features`
};

struct SweepResult {
  RankEnd end = RankEnd::best;
  std::vector<SweepEntry> entries;  // k = 1..k_max
  // Best end: k with the highest accuracy. Worst end: k with the lowest
  // accuracy, i.e. the best k once inverted. Ties go to the smaller k.
  std::size_t optimum_k = 0;
};

inline SweepResult sweep_attribute_count(const LearnerSpec& spec, const Ranking& ranking, const Dataset& d, RankEnd end,
                                         std::size_t k_max, const CVSpec& cv) {
  if (k_max < 1 || k_max > d.n_attributes() || k_max > ranking.order.size())
    throw PreconditionError("k_max must lie in 1.." + std::to_string(std::min(d.n_attributes(), ranking.order.size())));
  SweepResult result;
  result.end = end;
  result.entries.resize(k_max);
  parallel_for(k_max, [&](std::size_t idx) {
    SweepEntry& e = result.entries[idx];
    e.k = idx + 1;
    e.features = select_k(ranking, end, e.k);
    const auto table = cross_validate(spec, d, e.features, cv);
    e.n_correct = table.n_correct();
    e.n_total = table.n_total();
    e.accuracy = table.accuracy();
    e.model = fit(spec, d, e.features);
  });
  std::size_t opt = 0;
  for (std::size_t i = 1; i < k_max; ++i) {
    const bool better = end == RankEnd::best ? result.entries[i].accuracy > result.entries[opt].accuracy
                                             : result.entries[i].accuracy < result.entries[opt].accuracy;
    if (better) opt = i;
  }
  result.optimum_k = result.entries[opt].k;
  return result;
}

struct OrientedModel {
  TrainedModel model;
  double inner_accuracy = 0.0;
  // Too few samples per class for inner validation; orientation was chosen
  // from training accuracy instead.
  bool resubstitution = false;
};

/// Inverts the fitted model when its inner cross-validated accuracy is below
/// one half. Exactly one half keeps the normal orientation.
inline OrientedModel auto_orient(const LearnerSpec& spec, const Dataset& d, std::span<const std::size_t> features,
                                 const CVSpec& inner_cv) {
  const auto& labels = d.label_vector();
  const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const auto zeros = labels.size() - ones;
  const bool inner_possible = ones >= 2 && zeros >= 2 &&
                              (inner_cv.kind == CVKind::loo || labels.size() >= static_cast<std::size_t>(inner_cv.k));

  TrainedModel model = fit(spec, d, features);
  OrientedModel out{model, 0.0, !inner_possible};
  if (inner_possible) {
    out.inner_accuracy = cross_validate(spec, d, features, inner_cv).accuracy();
  } else {
    out.inner_accuracy = accuracy(predict_all(model, d), labels);
  }
  if (out.inner_accuracy < 0.5) out.model = model.inverted();
  return out;
}

inline OrientedModel auto_orient(const LearnerSpec& spec, const Dataset& d, const CVSpec& inner_cv) {
  return auto_orient(spec, d, all_features(d), inner_cv);
}

}  // namespace agreelearn
