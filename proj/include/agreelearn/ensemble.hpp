#pragma once

// Agreement (logical-AND) voting: an ensemble predicts a class only when all
// of its members output that class, and abstains otherwise.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agreelearn/antilearn.hpp"
#include "agreelearn/dataset.hpp"
#include "agreelearn/error.hpp"
#include "agreelearn/evaluation.hpp"
#include "agreelearn/learners/learner.hpp"
#include "agreelearn/parallel.hpp"
#include "agreelearn/ranking.hpp"

namespace agreelearn {

struct ExplicitFeatures {
  std::vector<std::size_t> indices;
};

/// best_k / worst_k of a ranking recomputed on each training split.
struct RankedFeatures {
  RankerSpec ranker;
  RankEnd end = RankEnd::best;
  std::size_t k = 1;
};

/// The member sees only the tumour stage, as a single numeric attribute.
struct TnmOnly {};

using FeatureSelection = std::variant<ExplicitFeatures, RankedFeatures, TnmOnly>;

enum class OrientationPolicy { normal, inverted, auto_select };

inline std::string_view to_string(OrientationPolicy p) {
  switch (p) {
    case OrientationPolicy::normal: return "normal";
    case OrientationPolicy::inverted: return "inverted";
    case OrientationPolicy::auto_select: return "auto";
  }
  return "?";
}

inline OrientationPolicy parse_orientation_policy(std::string_view s) {
  if (s == "normal") return OrientationPolicy::normal;
  if (s == "inverted") return OrientationPolicy::inverted;
  if (s == "auto") return OrientationPolicy::auto_select;
  throw PreconditionError("orientation must be normal, inverted or auto; got '" + std::string(s) + "'");
}

struct EnsembleMember {
  std::string name;
  LearnerSpec spec;
  FeatureSelection features;
  OrientationPolicy orientation = OrientationPolicy::normal;
  CVSpec inner_cv = CVSpec::kfold(5);  // used by auto orientation
};

inline void validate_members(std::span<const EnsembleMember> members) {
  std::set<std::string_view> names;
  for (const auto& m : members) {
    if (m.name.empty()) throw PreconditionError("ensemble member without a name");
    if (!names.insert(m.name).second) throw PreconditionError("duplicate ensemble member name '" + m.name + "'");
    try {
      m.spec.validate();
    } catch (const Error& e) {
      throw PreconditionError("member '" + m.name + "': " + e.what());
    }
  }
}

/// The dataset as members see it: the original attributes followed, when the
/// dataset carries tumour stages, by one extra "tnm_stage" column.
struct MemberFrame {
  Dataset data;
  std::size_t n_original = 0;
  std::optional<std::size_t> tnm_column;
};

inline constexpr std::string_view kTnmAttribute = "tnm_stage";

inline MemberFrame member_frame(const Dataset& d) {
  MemberFrame f{d, d.n_attributes(), std::nullopt};
  if (!d.tnm_stage) return f;
  if (d.find_attribute(kTnmAttribute))
    throw SchemaError("attribute name '" + std::string(kTnmAttribute) + "' is reserved for the stage column");
  const auto n = static_cast<Eigen::Index>(d.n_samples());
  const auto p = static_cast<Eigen::Index>(d.n_attributes());
  f.data.attributes.emplace_back(kTnmAttribute);
  f.data.values.conservativeResize(n, p + 1);
  f.data.missing.conservativeResize(n, p + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.data.values(i, p) = (*d.tnm_stage)[static_cast<std::size_t>(i)];
    f.data.missing(i, p) = false;
  }
  f.tnm_column = static_cast<std::size_t>(p);
  return f;
}

struct FittedMember {
  std::string name;
  TrainedModel model;
};

namespace detail {

using RankingCache = std::map<RankerSpec, Ranking>;

inline std::vector<std::size_t> resolve_features(const EnsembleMember& m, const Dataset& train, std::size_t n_original,
                                                 RankingCache& cache) {
  return std::visit(
      [&](const auto& sel) -> std::vector<std::size_t> {
        using S = std::decay_t<decltype(sel)>;
        if constexpr (std::is_same_v<S, ExplicitFeatures>) {
          for (auto i : sel.indices)
            if (i >= n_original)
              throw PreconditionError("member '" + m.name + "' references attribute index " + std::to_string(i) +
                                      " beyond the dataset");
          return sel.indices;
        } else if constexpr (std::is_same_v<S, RankedFeatures>) {
          auto it = cache.find(sel.ranker);
          if (it == cache.end()) {
            std::vector<std::size_t> original(n_original);
            std::iota(original.begin(), original.end(), std::size_t{0});
            it = cache.emplace(sel.ranker, rank(train.select_attributes(original), sel.ranker)).first;
          }
          if (sel.k < 1 || sel.k > n_original)
            throw PreconditionError("member '" + m.name + "' asks for k=" + std::to_string(sel.k) + " of " +
                                    std::to_string(n_original) + " attributes");
          return select_k(it->second, sel.end, sel.k);
        } else {
          if (train.n_attributes() == n_original)
            throw PreconditionError("member '" + m.name + "' needs tnm stages, which the dataset lacks");
          return {n_original};
        }
      },
      m.features);
}

inline FittedMember fit_member(const EnsembleMember& m, const Dataset& train, std::size_t n_original,
                               RankingCache& cache, std::uint64_t fold_seed) {
  try {
    const auto features = resolve_features(m, train, n_original, cache);
    switch (m.orientation) {
      case OrientationPolicy::normal: return {m.name, fit(m.spec, train, features)};
      case OrientationPolicy::inverted: return {m.name, fit(m.spec, train, features).inverted()};
      case OrientationPolicy::auto_select: {
        CVSpec inner = m.inner_cv;
        inner.seed = derive_seed(m.inner_cv.seed, fold_seed);
        return {m.name, auto_orient(m.spec, train, features, inner).model};
      }
    }
  } catch (const Error& e) {
    throw Error("member '" + m.name + "': " + e.what());
  }
  throw UnsupportedOperation("unhandled orientation policy");
}

}  // namespace detail

/// Fits every member on a member frame (see member_frame).
inline std::vector<FittedMember> fit_members(std::span<const EnsembleMember> members, const MemberFrame& frame,
                                             std::uint64_t seed = 0) {
  validate_members(members);
  detail::RankingCache cache;
  std::vector<FittedMember> out;
  for (const auto& m : members) out.push_back(detail::fit_member(m, frame.data, frame.n_original, cache, seed));
  return out;
}

/// The six-member roster: stage-only CART, SVM best 8, inverted SVM worst 8,
/// logistic best 8, inverted logistic worst 9, gain-ratio tree best 8.
inline std::vector<EnsembleMember> build_default_members(const Dataset& d, const Ranking& ranking) {
  if (!d.tnm_stage) throw PreconditionError("the default roster needs tnm stages");
  d.label_vector();
  if (ranking.order.size() != d.n_attributes())
    throw PreconditionError("ranking covers " + std::to_string(ranking.order.size()) + " attributes, dataset has " +
                            std::to_string(d.n_attributes()));
  if (d.n_attributes() < 9) throw PreconditionError("the default roster needs at least 9 ranked attributes");
  const RankerSpec ranker{parse_evaluator(ranking.evaluator)};
  auto ranked = [&](RankEnd end, std::size_t k) { return RankedFeatures{ranker, end, k}; };
  return {
      {"cart_tnm", {LearnerKind::cart, {}, 0}, TnmOnly{}, OrientationPolicy::normal},
      {"svm_best8", {LearnerKind::svm_smo, {}, 0}, ranked(RankEnd::best, 8), OrientationPolicy::normal},
      {"svm_worst8", {LearnerKind::svm_smo, {}, 0}, ranked(RankEnd::worst, 8), OrientationPolicy::inverted},
      {"logistic_best8", {LearnerKind::logistic, {}, 0}, ranked(RankEnd::best, 8), OrientationPolicy::normal},
      {"logistic_worst9", {LearnerKind::logistic, {}, 0}, ranked(RankEnd::worst, 9), OrientationPolicy::inverted},
      {"j48_best8", {LearnerKind::gainratio_tree, {}, 0}, ranked(RankEnd::best, 8), OrientationPolicy::normal},
  };
}

struct AgreementPrediction {
  std::optional<int> value;  // empty: abstain
  std::vector<int> votes;
};

inline std::optional<int> unanimous(std::span<const int> votes) {
  if (votes.empty()) return std::nullopt;
  for (int v : votes)
    if (v != votes.front()) return std::nullopt;
  return votes.front();
}

/// `sample` must come from a member frame.
inline AgreementPrediction predict_agreement(std::span<const FittedMember> members, const Sample& sample) {
  AgreementPrediction p;
  for (const auto& m : members) {
    try {
      p.votes.push_back(predict(m.model, sample));
    } catch (const Error& e) {
      throw Error("member '" + m.name + "': " + e.what());
    }
  }
  p.value = unanimous(p.votes);
  return p;
}

using SubsetMask = std::uint32_t;

/// Every non-empty subset of m members as a bitmask (bit i = member i),
/// ordered by size, then lexicographically by member indices.
inline std::vector<SubsetMask> enumerate_subsets(std::size_t m) {
  if (m < 1 || m > 16) throw PreconditionError("subset enumeration supports 1..16 members");
  std::vector<SubsetMask> out;
  out.reserve((std::size_t{1} << m) - 1);
  for (std::size_t size = 1; size <= m; ++size) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (;;) {
      SubsetMask mask = 0;
      for (auto i : idx) mask |= SubsetMask{1} << i;
      out.push_back(mask);
      // next combination in lexicographic order
      std::size_t pos = size;
      while (pos > 0 && idx[pos - 1] == m - size + pos - 1) --pos;
      if (pos == 0) break;
      ++idx[pos - 1];
      for (std::size_t j = pos; j < size; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

inline std::vector<std::size_t> subset_members(SubsetMask mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; mask; ++i, mask >>= 1)
    if (mask & 1) out.push_back(i);
  return out;
}

struct SubsetReport {
  SubsetMask mask = 0;
  std::vector<std::string> names;
  std::size_t size = 0;
  std::size_t n_matches = 0;  // samples where all subset members agree
  std::size_t n_correct = 0;
  std::optional<double> accuracy;  // undefined when there are no matches
};

/// votes[sample][member]
using VoteMatrix = std::vector<std::vector<int>>;

inline std::optional<int> subset_agreement(std::span<const int> votes, SubsetMask mask) {
  std::optional<int> value;
  for (auto i : subset_members(mask)) {
    if (!value) value = votes[i];
    else if (*value != votes[i]) return std::nullopt;
  }
  return value;
}

inline SubsetReport tally_subset(const VoteMatrix& votes, std::span<const int> labels, SubsetMask mask,
                                 std::span<const std::string> member_names = {}) {
  SubsetReport r;
  r.mask = mask;
  r.size = static_cast<std::size_t>(std::popcount(mask));
  for (auto i : subset_members(mask))
    if (i < member_names.size()) r.names.push_back(member_names[i]);
  for (std::size_t s = 0; s < votes.size(); ++s) {
    const auto v = subset_agreement(votes[s], mask);
    if (!v) continue;
    ++r.n_matches;
    r.n_correct += *v == labels[s];
  }
  if (r.n_matches) r.accuracy = static_cast<double>(r.n_correct) / static_cast<double>(r.n_matches);
  return r;
}

struct SizeSummary {
  std::size_t size = 0;
  std::size_t n_subsets = 0;
  double mean_matches = 0.0;
  std::optional<double> mean_accuracy;  // over subsets with a defined accuracy
};

inline std::vector<SizeSummary> summarize_by_size(std::span<const SubsetReport> reports) {
  std::map<std::size_t, std::vector<const SubsetReport*>> by;
  for (const auto& r : reports) by[r.size].push_back(&r);
  std::vector<SizeSummary> out;
  for (const auto& [size, rs] : by) {
    SizeSummary s;
    s.size = size;
    s.n_subsets = rs.size();
    double matches = 0, acc = 0;
    std::size_t defined = 0;
    for (const auto* r : rs) {
      matches += static_cast<double>(r->n_matches);
      if (r->accuracy) {
        acc += *r->accuracy;
        ++defined;
      }
    }
    s.mean_matches = matches / static_cast<double>(rs.size());
    if (defined) s.mean_accuracy = acc / static_cast<double>(defined);
    out.push_back(s);
  }
  return out;
}

struct EnsembleEvaluation {
  std::vector<std::string> member_names;
  VoteMatrix votes;  // held-out, oriented votes
  std::vector<int> labels;
  std::vector<Fold> folds;
  std::vector<SubsetReport> subsets;
  std::vector<SizeSummary> by_size;

  /// Full-ensemble agreement per sample.
  std::vector<std::optional<int>> agreement(SubsetMask mask) const {
    std::vector<std::optional<int>> out;
    for (const auto& v : votes) out.push_back(subset_agreement(v, mask));
    return out;
  }
};

/// Held-out vote matrix: each member is fitted once per fold on the training
/// split (feature ranking and auto orientation included) and votes on the
/// test split.
inline EnsembleEvaluation collect_votes(std::span<const EnsembleMember> members, const Dataset& d, const CVSpec& cv) {
  validate_members(members);
  if (members.empty()) throw PreconditionError("ensemble needs at least one member");
  const MemberFrame frame = member_frame(d);
  EnsembleEvaluation ev;
  for (const auto& m : members) ev.member_names.push_back(m.name);
  ev.labels = d.label_vector();
  ev.folds = checked_folds(frame.data, cv);
  const auto per_fold = map_folds(frame.data, ev.folds, [&](const Dataset& train, const Dataset& test, std::size_t f) {
    detail::RankingCache cache;
    std::vector<FittedMember> fitted;
    for (const auto& m : members) fitted.push_back(detail::fit_member(m, train, frame.n_original, cache, f));
    VoteMatrix votes;
    for (std::size_t i = 0; i < test.n_samples(); ++i)
      votes.push_back(predict_agreement(fitted, sample_at(test, i)).votes);
    return votes;
  });
  ev.votes.assign(d.n_samples(), {});
  for (std::size_t f = 0; f < ev.folds.size(); ++f)
    for (std::size_t t = 0; t < ev.folds[f].test.size(); ++t) ev.votes[ev.folds[f].test[t]] = per_fold[f][t];
  return ev;
}

inline EnsembleEvaluation evaluate_subsets(std::span<const EnsembleMember> members, const Dataset& d, const CVSpec& cv) {
  EnsembleEvaluation ev = collect_votes(members, d, cv);
  for (auto mask : enumerate_subsets(members.size()))
    ev.subsets.push_back(tally_subset(ev.votes, ev.labels, mask, ev.member_names));
  ev.by_size = summarize_by_size(ev.subsets);
  return ev;
}

/// Held-out predictions of a single member (its singleton ensemble).
inline PredictionTable pooled_cv(const EnsembleMember& member, const Dataset& d, const CVSpec& cv) {
  const auto ev = collect_votes(std::span<const EnsembleMember>(&member, 1), d, cv);
  PredictionTable t;
  t.label = ev.labels;
  t.folds = ev.folds;
  t.fold.assign(d.n_samples(), 0);
  for (std::size_t f = 0; f < t.folds.size(); ++f)
    for (auto i : t.folds[f].test) t.fold[i] = f;
  for (const auto& v : ev.votes) t.prediction.push_back(v.front());
  return t;
}

// ---------------------------------------------------------------------------
// Ease of prognosis

enum class Ease { easy, hard, excluded };

inline std::string_view to_string(Ease e) {
  switch (e) {
    case Ease::easy: return "easy";
    case Ease::hard: return "hard";
    case Ease::excluded: return "excluded";
  }
  return "?";
}

/// Unanimous votes are easy, an exact half split is hard, anything else is
/// excluded. Needs an even member count.
inline std::vector<Ease> ease_from_votes(const VoteMatrix& votes) {
  std::vector<Ease> out;
  out.reserve(votes.size());
  for (const auto& v : votes) {
    const std::size_t m = v.size();
    if (m == 0 || m % 2 != 0) throw PreconditionError("ease labels need an even, non-zero member count");
    const auto ones = static_cast<std::size_t>(std::count(v.begin(), v.end(), 1));
    out.push_back(ones == 0 || ones == m ? Ease::easy : (2 * ones == m ? Ease::hard : Ease::excluded));
  }
  return out;
}

inline std::vector<Ease> ease_labels(std::span<const EnsembleMember> members, const Dataset& d, const CVSpec& cv) {
  if (members.empty() || members.size() % 2 != 0)
    throw PreconditionError("ease labels need an even number of members, got " + std::to_string(members.size()));
  return ease_from_votes(collect_votes(members, d, cv).votes);
}

struct MarkerAnalysis {
  std::string marker;
  std::size_t n_easy = 0;
  std::size_t n_hard = 0;
  double mean_easy = 0.0;
  double mean_hard = 0.0;
  double threshold = 0.0;
  // true: values above the threshold are called hard; false: below. When the
  // group means coincide every sample is called the larger group.
  bool hard_above = true;
  double accuracy = 0.0;
};

inline MarkerAnalysis ease_marker_analysis(const Dataset& d, std::span<const Ease> ease, std::size_t marker,
                                           std::optional<double> threshold = std::nullopt) {
  if (ease.size() != d.n_samples()) throw PreconditionError("one ease label per sample required");
  if (marker >= d.n_attributes()) throw PreconditionError("marker index out of range");
  MarkerAnalysis a;
  a.marker = d.attributes[marker];
  std::vector<std::pair<double, bool>> rows;  // (value, is_hard)
  const auto c = static_cast<Eigen::Index>(marker);
  for (std::size_t i = 0; i < ease.size(); ++i) {
    if (ease[i] == Ease::excluded || d.missing(static_cast<Eigen::Index>(i), c)) continue;
    const double v = d.values(static_cast<Eigen::Index>(i), c);
    const bool hard = ease[i] == Ease::hard;
    rows.emplace_back(v, hard);
    (hard ? a.mean_hard : a.mean_easy) += v;
    ++(hard ? a.n_hard : a.n_easy);
  }
  if (a.n_easy == 0 || a.n_hard == 0) throw PreconditionError("marker analysis needs at least one easy and one hard sample");
  a.mean_easy /= static_cast<double>(a.n_easy);
  a.mean_hard /= static_cast<double>(a.n_hard);
  a.threshold = threshold.value_or(0.5 * (a.mean_easy + a.mean_hard));
  a.hard_above = a.mean_hard >= a.mean_easy;
  const bool degenerate = a.mean_hard == a.mean_easy && !threshold;
  const bool majority_hard = a.n_hard > a.n_easy;
  std::size_t correct = 0;
  for (const auto& [v, hard] : rows) {
    const bool called_hard = degenerate ? majority_hard : (a.hard_above ? v > a.threshold : v < a.threshold);
    correct += called_hard == hard;
  }
  a.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  return a;
}

struct EaseModel {
  TrainedModel model;  // class 1 = hard
  double loo_accuracy = 0.0;
  std::size_t n_samples = 0;
};

/// Predicts hard (1) vs easy (0) from three markers with the given MLP spec.
inline EaseModel ease_model(const Dataset& d, std::span<const Ease> ease, const std::array<std::size_t, 3>& markers,
                            const LearnerSpec& mlp_spec) {
  if (ease.size() != d.n_samples()) throw PreconditionError("one ease label per sample required");
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < ease.size(); ++i) {
    if (ease[i] == Ease::excluded) continue;
    rows.push_back(i);
    labels.push_back(ease[i] == Ease::hard ? 1 : 0);
  }
  const auto hard = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (hard < 4 || labels.size() - hard < 4) throw PreconditionError("ease model needs at least 4 easy and 4 hard samples");
  Dataset sub = d.subset_rows(rows).select_attributes(markers);
  sub.labels = std::move(labels);
  sub.survival.reset();
  sub.tnm_stage.reset();
  const std::vector<std::size_t> features{0, 1, 2};
  const auto table = cross_validate(mlp_spec, sub, features, CVSpec::loo());
  return {fit(mlp_spec, sub, features), table.accuracy(), sub.n_samples()};
}

}  // namespace agreelearn
