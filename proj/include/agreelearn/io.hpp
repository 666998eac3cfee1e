#pragma once

// JSON and CSV artifacts: models, member rosters, rankings, sweeps, subset
// reports and evaluation reports.

#include <json.hpp>

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "agreelearn/antilearn.hpp"
#include "agreelearn/dataset.hpp"
#include "agreelearn/ensemble.hpp"
#include "agreelearn/error.hpp"
#include "agreelearn/evaluation.hpp"
#include "agreelearn/learners/learner.hpp"
#include "agreelearn/ranking.hpp"

namespace agreelearn::io {

using json = nlohmann::ordered_json;

inline constexpr std::string_view kModelSchema = "agreelearn-model/1";
inline constexpr std::string_view kMembersSchema = "agreelearn-members/1";
inline constexpr std::string_view kArtifactVersion = "1";

namespace detail {

inline json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Eigen::VectorXd vector_from(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a.at(i).get<double>();
  return v;
}

inline const json& field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) throw SchemaError(where + ": missing field '" + name + "'");
  return j.at(name);
}

}  // namespace detail

inline json to_json(const LearnerSpec& s) {
  json params = json::object();
  for (const auto& [k, v] : s.hyperparameters) params[k] = v;
  return {{"kind", to_string(s.kind)}, {"params", params}, {"seed", s.seed}};
}

inline LearnerSpec learner_spec_from_json(const json& j, const std::string& where = "learner") {
  LearnerSpec s;
  s.kind = parse_learner_kind(detail::field(j, "kind", where).get<std::string>());
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items()) s.hyperparameters[k] = v.get<double>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  s.validate();
  return s;
}

inline json to_json(const TrainedModel& m) {
  json j;
  j["schema"] = kModelSchema;
  j["learner"] = to_json(m.spec());
  j["features"] = m.feature_subset();
  j["orientation"] = to_string(m.orientation());
  json p;
  std::visit(
      [&](const auto& params) {
        using P = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<P, LinearParameters>) {
          p = {{"weights", detail::vector_json(params.weights)}, {"bias", params.bias}};
        } else if constexpr (std::is_same_v<P, TreeParameters>) {
          p["nodes"] = json::array();
          for (const auto& n : params.nodes)
            p["nodes"].push_back({{"feature", n.feature},
                                  {"threshold", n.threshold},
                                  {"left", n.left},
                                  {"right", n.right},
                                  {"leaf_class", n.leaf_class}});
        } else if constexpr (std::is_same_v<P, MlpParameters>) {
          json hw = json::array();
          for (Eigen::Index r = 0; r < params.network.hidden_weights.rows(); ++r)
            hw.push_back(detail::vector_json(params.network.hidden_weights.row(r).transpose()));
          p = {{"input_mean", detail::vector_json(params.input_mean)},
               {"input_scale", detail::vector_json(params.input_scale)},
               {"hidden_weights", hw},
               {"hidden_bias", detail::vector_json(params.network.hidden_bias)},
               {"output_weights", detail::vector_json(params.network.output_weights)},
               {"output_bias", params.network.output_bias}};
        } else {
          p = json::object();
        }
      },
      m.parameters());
  j["parameters"] = p;
  return j;
}

inline TrainedModel model_from_json(const json& j) {
  const std::string where = "model";
  if (detail::field(j, "schema", where).get<std::string>() != kModelSchema)
    throw SchemaError("unsupported model schema '" + j.at("schema").get<std::string>() + "'");
  const LearnerSpec spec = learner_spec_from_json(detail::field(j, "learner", where));
  const auto features = detail::field(j, "features", where).get<std::vector<std::size_t>>();
  const auto orientation_name = detail::field(j, "orientation", where).get<std::string>();
  if (orientation_name != "normal" && orientation_name != "inverted")
    throw SchemaError("model orientation must be normal or inverted");
  const Orientation orientation = orientation_name == "normal" ? Orientation::normal : Orientation::inverted;
  const json& p = detail::field(j, "parameters", where);
  ModelParameters params;
  switch (spec.kind) {
    case LearnerKind::svm_smo:
    case LearnerKind::logistic:
      params = LinearParameters{detail::vector_from(detail::field(p, "weights", where)),
                                detail::field(p, "bias", where).get<double>()};
      break;
    case LearnerKind::cart:
    case LearnerKind::gainratio_tree: {
      TreeParameters t;
      for (const auto& n : detail::field(p, "nodes", where))
        t.nodes.push_back({n.at("feature").get<int>(), n.at("threshold").get<double>(), n.at("left").get<int>(),
                           n.at("right").get<int>(), n.at("leaf_class").get<int>()});
      params = std::move(t);
      break;
    }
    case LearnerKind::mlp: {
      MlpParameters m;
      m.input_mean = detail::vector_from(detail::field(p, "input_mean", where));
      m.input_scale = detail::vector_from(detail::field(p, "input_scale", where));
      const json& hw = detail::field(p, "hidden_weights", where);
      const auto inputs = static_cast<Eigen::Index>(m.input_mean.size());
      m.network.hidden_weights.resize(static_cast<Eigen::Index>(hw.size()), inputs);
      for (std::size_t r = 0; r < hw.size(); ++r) {
        if (hw.at(r).size() != static_cast<std::size_t>(inputs)) throw SchemaError("mlp weight row has wrong width");
        m.network.hidden_weights.row(static_cast<Eigen::Index>(r)) = detail::vector_from(hw.at(r)).transpose();
      }
      m.network.hidden_bias = detail::vector_from(detail::field(p, "hidden_bias", where));
      m.network.output_weights = detail::vector_from(detail::field(p, "output_weights", where));
      m.network.output_bias = detail::field(p, "output_bias", where).get<double>();
      params = std::move(m);
      break;
    }
    case LearnerKind::tnm_rule: params = TnmRuleParameters{}; break;
  }
  return {spec, features, std::move(params), orientation};
}

// ---------------------------------------------------------------------------
// Member rosters

inline json to_json(const EnsembleMember& m, const Dataset& d) {
  json j;
  j["name"] = m.name;
  j["learner"] = to_json(m.spec);
  std::visit(
      [&](const auto& sel) {
        using S = std::decay_t<decltype(sel)>;
        if constexpr (std::is_same_v<S, ExplicitFeatures>) {
          json names = json::array();
          for (auto i : sel.indices) names.push_back(d.attributes.at(i));
          j["features"] = {{"type", "explicit"}, {"attributes", names}};
        } else if constexpr (std::is_same_v<S, RankedFeatures>) {
          j["features"] = {{"type", sel.end == RankEnd::best ? "best_k" : "worst_k"},
                           {"evaluator", to_string(sel.ranker.evaluator)},
                           {"k", sel.k}};
          if (sel.ranker.evaluator == Evaluator::svm_rfe) j["features"]["c"] = sel.ranker.c;
          else j["features"]["n_bins"] = sel.ranker.n_bins;
        } else {
          j["features"] = {{"type", "tnm_only"}};
        }
      },
      m.features);
  j["orientation"] = to_string(m.orientation);
  return j;
}

inline json members_to_json(std::span<const EnsembleMember> members, const Dataset& d) {
  json j;
  j["schema"] = kMembersSchema;
  j["members"] = json::array();
  for (const auto& m : members) j["members"].push_back(to_json(m, d));
  return j;
}

/// Parses a roster. Explicit attribute names are resolved against `d`; every
/// error names the offending member.
inline std::vector<EnsembleMember> members_from_json(const json& j, const Dataset& d, std::uint64_t seed = 0) {
  if (detail::field(j, "schema", "members config").get<std::string>() != kMembersSchema)
    throw SchemaError("members config schema must be '" + std::string(kMembersSchema) + "'");
  std::vector<EnsembleMember> out;
  std::size_t position = 0;
  for (const auto& mj : detail::field(j, "members", "members config")) {
    const std::string label = mj.contains("name") && mj.at("name").is_string()
                                  ? "member '" + mj.at("name").get<std::string>() + "'"
                                  : "member #" + std::to_string(position);
    ++position;
    try {
      EnsembleMember m;
      m.name = detail::field(mj, "name", label).get<std::string>();
      m.spec = learner_spec_from_json(detail::field(mj, "learner", label), label);
      const json& fj = detail::field(mj, "features", label);
      const auto type = detail::field(fj, "type", label).get<std::string>();
      if (type == "explicit") {
        ExplicitFeatures e;
        for (const auto& name : detail::field(fj, "attributes", label)) {
          const auto s = name.get<std::string>();
          const auto idx = d.find_attribute(s);
          if (!idx) throw SchemaError("unknown attribute '" + s + "'");
          e.indices.push_back(*idx);
        }
        if (e.indices.empty()) throw SchemaError("explicit feature list is empty");
        m.features = std::move(e);
      } else if (type == "best_k" || type == "worst_k") {
        RankedFeatures r;
        r.end = type == "best_k" ? RankEnd::best : RankEnd::worst;
        r.ranker.evaluator = parse_evaluator(detail::field(fj, "evaluator", label).get<std::string>());
        if (fj.contains("c")) r.ranker.c = fj.at("c").get<double>();
        if (fj.contains("n_bins")) r.ranker.n_bins = fj.at("n_bins").get<int>();
        r.k = detail::field(fj, "k", label).get<std::size_t>();
        if (r.k < 1 || r.k > d.n_attributes())
          throw SchemaError("k=" + std::to_string(r.k) + " outside 1.." + std::to_string(d.n_attributes()));
        m.features = r;
      } else if (type == "tnm_only") {
        if (!d.tnm_stage) throw SchemaError("tnm_only needs a dataset with tnm stages");
        m.features = TnmOnly{};
      } else {
        throw SchemaError("unknown feature selection type '" + type + "'");
      }
      m.orientation = parse_orientation_policy(mj.value("orientation", std::string("normal")));
      m.inner_cv.seed = derive_seed(seed, position);
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(label + ": " + e.what());
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (msg.rfind(label, 0) == 0) throw;
      throw SchemaError(label + ": " + msg);
    }
  }
  validate_members(out);
  return out;
}

// ---------------------------------------------------------------------------
// CSV artifacts

inline void write_ranking_csv(std::ostream& out, const Ranking& r, const Dataset& d) {
  out << "evaluator,rank,attribute_name,score\n";
  for (std::size_t i = 0; i < r.order.size(); ++i)
    out << r.evaluator << ',' << i + 1 << ',' << d.attributes.at(r.order[i]) << ',' << format_double(r.scores[i])
        << '\n';
}

/// Reads a ranking CSV and checks that it names each attribute of `d` exactly once.
inline Ranking read_ranking_csv(std::istream& in, const Dataset& d) {
  std::string line;
  if (!std::getline(in, line) || agreelearn::detail::trim(line) != "evaluator,rank,attribute_name,score")
    throw SchemaError("ranking CSV must start with header evaluator,rank,attribute_name,score");
  Ranking r;
  std::vector<std::pair<long, std::size_t>> ranked;
  std::vector<double> scores;
  std::vector<bool> seen(d.n_attributes(), false);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (agreelearn::detail::trim(line).empty()) continue;
    const auto fields = agreelearn::detail::split_csv_line(line);
    if (fields.size() != 4) throw ParseError(row, "*", "expected 4 fields");
    if (r.evaluator.empty()) r.evaluator = fields[0];
    else if (fields[0] != r.evaluator) throw ParseError(row, "evaluator", "mixed evaluators");
    const auto idx = d.find_attribute(fields[2]);
    if (!idx) throw SchemaError("ranking names attribute '" + fields[2] + "' which the dataset lacks");
    if (seen[*idx]) throw SchemaError("ranking lists attribute '" + fields[2] + "' twice");
    seen[*idx] = true;
    const auto rank_value = agreelearn::detail::parse_double(fields[1]);
    const auto score = agreelearn::detail::parse_double(fields[3]);
    if (!rank_value || !score) throw ParseError(row, "rank", "non-numeric rank or score");
    ranked.emplace_back(static_cast<long>(*rank_value), ranked.size());
    r.order.push_back(*idx);
    scores.push_back(*score);
  }
  if (r.order.size() != d.n_attributes())
    throw SchemaError("ranking covers " + std::to_string(r.order.size()) + " attributes, dataset has " +
                      std::to_string(d.n_attributes()));
  std::stable_sort(ranked.begin(), ranked.end());
  Ranking sorted{r.evaluator, {}, {}};
  for (const auto& [rk, pos] : ranked) {
    sorted.order.push_back(r.order[pos]);
    sorted.scores.push_back(scores[pos]);
  }
  return sorted;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& s) {
  out << "end,k,n_correct,n_total,accuracy,optimum\n";
  for (const auto& e : s.entries)
    out << to_string(s.end) << ',' << e.k << ',' << e.n_correct << ',' << e.n_total << ',' << format_double(e.accuracy)
        << ',' << (e.k == s.optimum_k ? 1 : 0) << '\n';
}

inline std::string join_names(const std::vector<std::string>& names, char sep = '+') {
  std::string s;
  for (const auto& n : names) {
    if (!s.empty()) s += sep;
    s += n;
  }
  return s;
}

inline void write_subsets_csv(std::ostream& out, std::span<const SubsetReport> reports) {
  out << "subset_bitmask,subset_names,size,n_matches,n_correct,accuracy\n";
  for (const auto& r : reports) {
    out << r.mask << ',' << join_names(r.names) << ',' << r.size << ',' << r.n_matches << ',' << r.n_correct << ',';
    if (r.accuracy) out << format_double(*r.accuracy);
    out << '\n';
  }
}

inline void write_size_summary_csv(std::ostream& out, std::span<const SizeSummary> rows) {
  out << "size,n_subsets,mean_matches,mean_accuracy\n";
  for (const auto& s : rows) {
    out << s.size << ',' << s.n_subsets << ',' << format_double(s.mean_matches) << ',';
    if (s.mean_accuracy) out << format_double(*s.mean_accuracy);
    out << '\n';
  }
}

/// Per-sample votes and full-ensemble agreement; empty prediction = abstain.
inline void write_agreement_csv(std::ostream& out, const EnsembleEvaluation& ev) {
  out << "row,label,fold";
  for (const auto& n : ev.member_names) out << ',' << n;
  out << ",prediction\n";
  std::vector<std::size_t> fold(ev.labels.size(), 0);
  for (std::size_t f = 0; f < ev.folds.size(); ++f)
    for (auto i : ev.folds[f].test) fold[i] = f;
  const SubsetMask all = static_cast<SubsetMask>((SubsetMask{1} << ev.member_names.size()) - 1);
  const auto agree = ev.agreement(all);
  for (std::size_t i = 0; i < ev.labels.size(); ++i) {
    out << i << ',' << ev.labels[i] << ',' << fold[i];
    for (int v : ev.votes[i]) out << ',' << v;
    out << ',';
    if (agree[i]) out << *agree[i];
    out << '\n';
  }
}

inline void write_predictions_csv(std::ostream& out, const PredictionTable& t) {
  out << "row,label,fold,prediction\n";
  for (std::size_t i = 0; i < t.prediction.size(); ++i)
    out << i << ',' << t.label[i] << ',' << t.fold[i] << ',' << t.prediction[i] << '\n';
}

/// Reads one 0/1 prediction per row from the column named `prediction`
/// (or the only column); empty cells are rejected.
inline std::vector<int> read_predictions_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("predictions CSV is empty");
  const auto header = agreelearn::detail::split_csv_line(line);
  std::size_t col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (agreelearn::detail::trim(header[c]) == "prediction") col = c;
  if (col == header.size()) {
    if (header.size() != 1) throw SchemaError("predictions CSV needs a 'prediction' column");
    col = 0;
  }
  std::vector<int> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (agreelearn::detail::trim(line).empty()) continue;
    const auto fields = agreelearn::detail::split_csv_line(line);
    if (fields.size() != header.size()) throw ParseError(row, "*", "ragged row");
    const auto v = agreelearn::detail::trim(fields[col]);
    if (v != "0" && v != "1") throw ParseError(row, "prediction", "expected 0 or 1");
    out.push_back(v == "1" ? 1 : 0);
  }
  return out;
}

inline json evaluation_report(const LearnerSpec& spec, const CVSpec& cv, const AntiLearnReport& r) {
  json j;
  j["spec"] = to_json(spec);
  j["cv"] = cv.to_string();
  j["seed"] = cv.seed;
  j["folds"] = r.predictions.folds.size();
  json per_fold = json::array();
  const auto accs = r.predictions.fold_accuracies();
  for (std::size_t f = 0; f < accs.size(); ++f)
    per_fold.push_back({{"fold", f}, {"n_test", r.predictions.folds[f].test.size()}, {"accuracy", accs[f]}});
  j["per_fold"] = per_fold;
  j["pooled"] = {{"n_correct", r.n_correct}, {"n_total", r.n_total}, {"accuracy", r.cv_accuracy}};
  j["p_value"] = r.p_value;
  j["alpha"] = r.alpha;
  j["verdict"] = to_string(r.verdict);
  return j;
}

}  // namespace agreelearn::io
