#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "agreelearn/dataset.hpp"
#include "agreelearn/error.hpp"

namespace agreelearn {

struct KMPoint {
  double time = 0.0;
  double survival = 1.0;
  std::size_t n_at_risk = 0;
};

/// Right-continuous step function. points.front() is (0, 1, n); every later
/// point is a step at an observed event time.
struct KMCurve {
  std::vector<KMPoint> points;

  double survival_at(double t) const {
    double s = 1.0;
    for (const auto& p : points) {
      if (p.time > t) break;
      s = p.survival;
    }
    return s;
  }
};

struct KMOptions {
  double horizon = 60.0;
  // Ignore censoring: S(t) = 1 - deaths up to t / n.
  bool raw_proportions = false;
};

inline KMCurve kaplan_meier(std::span<const SurvivalRecord> records, const KMOptions& opts = {}) {
  if (records.empty()) throw PreconditionError("kaplan_meier needs at least one record");
  // time -> (deaths, leaving the risk set)
  std::map<double, std::pair<std::size_t, std::size_t>> at;
  for (const auto& r : records) {
    auto& slot = at[r.months];
    slot.first += r.event ? 1 : 0;
    slot.second += 1;
  }
  KMCurve curve;
  const std::size_t n = records.size();
  curve.points.push_back({0.0, 1.0, n});
  std::size_t at_risk = n;
  std::size_t deaths_so_far = 0;
  double s = 1.0;
  for (const auto& [t, counts] : at) {
    if (t > opts.horizon) break;
    const auto [deaths, leaving] = counts;
    if (deaths > 0) {
      deaths_so_far += deaths;
      if (opts.raw_proportions) {
        s = 1.0 - static_cast<double>(deaths_so_far) / static_cast<double>(n);
      } else {
        s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      }
      if (t == 0.0) {
        curve.points.front().survival = s;
      } else {
        curve.points.push_back({t, s, at_risk});
      }
    }
    at_risk -= leaving;
  }
  return curve;
}

struct SurvivalGroup {
  std::string name;
  int stage = 0;
  int predicted = 0;  // 1: predicted to survive
  std::vector<std::size_t> members;
  std::optional<KMCurve> curve;  // empty group: no curve
};

/// (stage 2, survive), (stage 2, not), (stage 3, survive), (stage 3, not).
inline std::array<SurvivalGroup, 4> survival_groups(const Dataset& d, std::span<const int> predictions,
                                                    const KMOptions& opts = {}) {
  if (!d.survival) throw PreconditionError("survival_groups requires survival records");
  if (!d.tnm_stage) throw PreconditionError("survival_groups requires tnm stages");
  if (predictions.size() != d.n_samples()) throw PreconditionError("one prediction per sample required");
  std::array<SurvivalGroup, 4> groups{{{"TNM 2/model = survive", 2, 1, {}, {}},
                                       {"TNM 2/model = not survive", 2, 0, {}, {}},
                                       {"TNM 3/model = survive", 3, 1, {}, {}},
                                       {"TNM 3/model = not survive", 3, 0, {}, {}}}};
  for (std::size_t i = 0; i < d.n_samples(); ++i) {
    const int stage = (*d.tnm_stage)[i];
    if (stage != 2 && stage != 3)
      throw PreconditionError("survival_groups expects tnm stage 2 or 3, row " + std::to_string(i) +
                              " has " + std::to_string(stage));
    if (predictions[i] != 0 && predictions[i] != 1) throw PreconditionError("predictions must be 0 or 1");
    const std::size_t g = (stage == 2 ? 0 : 2) + (predictions[i] == 1 ? 0 : 1);
    groups[g].members.push_back(i);
  }
  for (auto& g : groups) {
    if (g.members.empty()) continue;
    std::vector<SurvivalRecord> recs;
    for (auto i : g.members) recs.push_back((*d.survival)[i]);
    g.curve = kaplan_meier(recs, opts);
  }
  return groups;
}

/// time,survival,n_at_risk,group
inline void write_km_csv_header(std::ostream& out) { out << "time,survival,n_at_risk,group\n"; }

inline void write_km_csv_rows(std::ostream& out, const KMCurve& curve, const std::string& group) {
  for (const auto& p : curve.points)
    out << format_double(p.time) << ',' << format_double(p.survival) << ',' << p.n_at_risk << ',' << group
        << '\n';
}

}  // namespace agreelearn
