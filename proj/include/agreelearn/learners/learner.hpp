#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "agreelearn/dataset.hpp"
#include "agreelearn/error.hpp"
#include "agreelearn/learners/logistic.hpp"
#include "agreelearn/learners/mlp.hpp"
#include "agreelearn/learners/smo.hpp"
#include "agreelearn/learners/tree.hpp"

namespace agreelearn {

enum class LearnerKind { svm_smo, logistic, cart, gainratio_tree, mlp, tnm_rule };

inline constexpr LearnerKind kAllLearnerKinds[] = {LearnerKind::svm_smo, LearnerKind::logistic,
                                                   LearnerKind::cart,    LearnerKind::gainratio_tree,
                                                   LearnerKind::mlp,     LearnerKind::tnm_rule};

inline std::string_view to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::svm_smo: return "svm_smo";
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::cart: return "cart";
    case LearnerKind::gainratio_tree: return "gainratio_tree";
    case LearnerKind::mlp: return "mlp";
    case LearnerKind::tnm_rule: return "tnm_rule";
  }
  return "?";
}

inline LearnerKind parse_learner_kind(std::string_view s) {
  for (auto k : kAllLearnerKinds)
    if (to_string(k) == s) return k;
  throw PreconditionError("unknown learner kind '" + std::string(s) + "'");
}

/// Defaults per kind. Hyperparameters not listed for a kind are rejected.
///   svm_smo:        C=1, tol=1e-3, max_iters=10000 (passes over the training set)
///   logistic:       l2=1e-8, tol=1e-8, max_iters=200 (Newton steps)
///   cart, gainratio_tree: max_depth=10 (0 = unbounded), min_leaf=2
///   mlp:            hidden_units=8, learning_rate=0.1, epochs=500
///   tnm_rule:       none
inline const std::map<std::string, double>& default_hyperparameters(LearnerKind k) {
  static const std::map<std::string, double> svm{{"C", 1.0}, {"tol", 1e-3}, {"max_iters", 10000}};
  static const std::map<std::string, double> logit{{"l2", 1e-8}, {"tol", 1e-8}, {"max_iters", 200}};
  static const std::map<std::string, double> trees{{"max_depth", 10}, {"min_leaf", 2}};
  static const std::map<std::string, double> net{{"hidden_units", 8}, {"learning_rate", 0.1}, {"epochs", 500}};
  static const std::map<std::string, double> none{};
  switch (k) {
    case LearnerKind::svm_smo: return svm;
    case LearnerKind::logistic: return logit;
    case LearnerKind::cart:
    case LearnerKind::gainratio_tree: return trees;
    case LearnerKind::mlp: return net;
    case LearnerKind::tnm_rule: return none;
  }
  return none;
}

struct LearnerSpec {
  LearnerKind kind = LearnerKind::svm_smo;
  std::map<std::string, double> hyperparameters;  // overrides of the defaults
  std::uint64_t seed = 0;

  double param(const std::string& name) const {
    if (auto it = hyperparameters.find(name); it != hyperparameters.end()) return it->second;
    const auto& defaults = default_hyperparameters(kind);
    if (auto it = defaults.find(name); it != defaults.end()) return it->second;
    throw PreconditionError("learner " + std::string(to_string(kind)) + " has no hyperparameter '" + name + "'");
  }

  LearnerSpec with(const std::string& name, double value) const {
    LearnerSpec s = *this;
    s.hyperparameters[name] = value;
    return s;
  }

  void validate() const {
    const auto& defaults = default_hyperparameters(kind);
    for (const auto& [name, value] : hyperparameters) {
      if (!defaults.contains(name))
        throw PreconditionError("hyperparameter '" + name + "' does not apply to " + std::string(to_string(kind)));
      if (!std::isfinite(value)) throw PreconditionError("hyperparameter '" + name + "' must be finite");
    }
    auto positive = [&](const char* n) {
      if (!(param(n) > 0)) throw PreconditionError(std::string(n) + " must be positive");
    };
    auto whole = [&](const char* n, double min) {
      const double v = param(n);
      if (v != std::floor(v) || v < min)
        throw PreconditionError(std::string(n) + " must be an integer >= " + std::to_string(static_cast<int>(min)));
    };
    switch (kind) {
      case LearnerKind::svm_smo:
        positive("C");
        positive("tol");
        whole("max_iters", 1);
        break;
      case LearnerKind::logistic:
        if (param("l2") < 0) throw PreconditionError("l2 must be non-negative");
        positive("tol");
        whole("max_iters", 1);
        break;
      case LearnerKind::cart:
      case LearnerKind::gainratio_tree:
        whole("max_depth", 0);
        whole("min_leaf", 1);
        break;
      case LearnerKind::mlp:
        whole("hidden_units", 1);
        positive("learning_rate");
        whole("epochs", 0);
        break;
      case LearnerKind::tnm_rule: break;
    }
  }
};

enum class Orientation { normal, inverted };

inline std::string_view to_string(Orientation o) { return o == Orientation::normal ? "normal" : "inverted"; }

/// Linear score w.x + b: SVM margin or logistic log-odds.
struct LinearParameters {
  Eigen::VectorXd weights;
  double bias = 0.0;
};

struct TreeParameters {
  std::vector<tree::Node> nodes;
};

/// Inputs are standardized with the training mean/scale before the network.
struct MlpParameters {
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  mlp::Network network;
};

/// Stage <= 2 predicts survival (1), stage >= 3 predicts 0.
struct TnmRuleParameters {};

using ModelParameters = std::variant<LinearParameters, TreeParameters, MlpParameters, TnmRuleParameters>;

/// A fitted classifier. Immutable; inversion yields a new model that shares
/// the same fitted state with the opposite orientation.
class TrainedModel {
 public:
  TrainedModel(LearnerSpec spec, std::vector<std::size_t> features, ModelParameters params,
               Orientation orientation = Orientation::normal)
      : spec_(std::move(spec)), features_(std::move(features)), params_(std::move(params)), orientation_(orientation) {}

  const LearnerSpec& spec() const { return spec_; }
  LearnerKind kind() const { return spec_.kind; }
  const std::vector<std::size_t>& feature_subset() const { return features_; }
  const ModelParameters& parameters() const { return params_; }
  Orientation orientation() const { return orientation_; }

  TrainedModel inverted() const {
    TrainedModel m = *this;
    m.orientation_ = orientation_ == Orientation::normal ? Orientation::inverted : Orientation::normal;
    return m;
  }

 private:
  LearnerSpec spec_;
  std::vector<std::size_t> features_;
  ModelParameters params_;
  Orientation orientation_;
};

/// One row as seen by a model.
struct Sample {
  std::span<const double> values;
  std::span<const bool> missing;  // empty: fully observed
  std::optional<int> tnm_stage;
};

inline Sample sample_at(const Dataset& d, std::size_t row) {
  Sample s;
  s.values = d.row(row);
  s.missing = {d.missing.data() + row * d.n_attributes(), d.n_attributes()};
  if (d.tnm_stage) s.tnm_stage = (*d.tnm_stage)[row];
  return s;
}

namespace detail {

inline Eigen::MatrixXd design_matrix(const Dataset& d, std::span<const std::size_t> features) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(d.n_samples()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t c = 0; c < features.size(); ++c) {
    if (features[c] >= d.n_attributes())
      throw PreconditionError("feature index " + std::to_string(features[c]) + " out of range");
    const auto src = static_cast<Eigen::Index>(features[c]);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (d.missing(i, src))
        throw PreconditionError("attribute '" + d.attributes[features[c]] + "' has a missing value at row " +
                                std::to_string(i));
      x(i, static_cast<Eigen::Index>(c)) = d.values(i, src);
    }
  }
  return x;
}

inline Eigen::VectorXd gather(const Sample& s, std::span<const std::size_t> features) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(features.size()));
  for (std::size_t c = 0; c < features.size(); ++c) {
    const auto f = features[c];
    if (f >= s.values.size() || (!s.missing.empty() && s.missing[f]))
      throw PreconditionError("sample lacks required attribute index " + std::to_string(f));
    x(static_cast<Eigen::Index>(c)) = s.values[f];
  }
  return x;
}

inline TrainedModel fit_svm(const LearnerSpec& spec, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                            std::vector<std::size_t> features) {
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = labels[i] ? 1 : -1;
  smo::Options opt;
  opt.c = spec.param("C");
  opt.tol = spec.param("tol");
  opt.max_updates = static_cast<std::size_t>(spec.param("max_iters")) * std::max<std::size_t>(1, y.size());
  const Eigen::MatrixXd kernel = x * x.transpose();
  const auto r = smo::solve(kernel, y, opt);
  if (!r.converged) throw ConvergenceError("svm_smo did not converge", r.updates, r.violation);
  Eigen::VectorXd ya(r.alpha.size());
  for (Eigen::Index i = 0; i < ya.size(); ++i) ya(i) = r.alpha(i) * y[static_cast<std::size_t>(i)];
  return {spec, std::move(features), LinearParameters{x.transpose() * ya, r.bias}};
}

inline TrainedModel fit_logistic(const LearnerSpec& spec, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                 std::vector<std::size_t> features) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
  const auto r = logistic::fit_newton(x, y, spec.param("l2"), spec.param("tol"),
                                      static_cast<std::size_t>(spec.param("max_iters")));
  if (!r.converged) throw ConvergenceError("logistic regression did not converge", r.iterations, r.gradient_norm);
  return {spec, std::move(features), LinearParameters{r.params.tail(x.cols()), r.params(0)}};
}

inline TrainedModel fit_mlp(const LearnerSpec& spec, const Eigen::MatrixXd& x, const std::vector<int>& labels,
                            std::vector<std::size_t> features) {
  MlpParameters p;
  const double n = static_cast<double>(x.rows());
  p.input_mean = x.colwise().sum().transpose() / n;
  p.input_scale = ((x.rowwise() - p.input_mean.transpose()).array().square().colwise().sum() / n)
                      .sqrt()
                      .transpose()
                      .unaryExpr([](double s) { return s > 0 ? s : 1.0; });
  const Eigen::MatrixXd z =
      (x.rowwise() - p.input_mean.transpose()).array().rowwise() / p.input_scale.transpose().array();
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
  p.network = mlp::train(z, y, static_cast<Eigen::Index>(spec.param("hidden_units")), spec.param("learning_rate"),
                         static_cast<int>(spec.param("epochs")), spec.seed);
  return {spec, std::move(features), std::move(p)};
}

inline double mlp_probability(const MlpParameters& p, const Eigen::VectorXd& x) {
  const Eigen::VectorXd z = ((x - p.input_mean).array() / p.input_scale.array()).matrix();
  return mlp::forward(p.network, z);
}

}  // namespace detail

/// Fits `spec` on the given attribute columns of a labeled dataset.
inline TrainedModel fit(const LearnerSpec& spec, const Dataset& d, std::span<const std::size_t> feature_subset) {
  spec.validate();
  const auto& labels = d.label_vector();
  std::vector<std::size_t> features(feature_subset.begin(), feature_subset.end());

  if (spec.kind == LearnerKind::tnm_rule) {
    if (!d.tnm_stage) throw PreconditionError("tnm_rule requires tnm stages");
    return {spec, std::move(features), TnmRuleParameters{}};
  }
  std::set<int> classes(labels.begin(), labels.end());
  if (classes.size() < 2)
    throw PreconditionError(std::string(to_string(spec.kind)) + " needs both classes in the training data");

  const Eigen::MatrixXd x = detail::design_matrix(d, features);
  switch (spec.kind) {
    case LearnerKind::svm_smo: return detail::fit_svm(spec, x, labels, std::move(features));
    case LearnerKind::logistic: return detail::fit_logistic(spec, x, labels, std::move(features));
    case LearnerKind::mlp: return detail::fit_mlp(spec, x, labels, std::move(features));
    case LearnerKind::cart:
    case LearnerKind::gainratio_tree: {
      tree::Options opt;
      opt.criterion = spec.kind == LearnerKind::cart ? tree::Criterion::gini : tree::Criterion::gain_ratio;
      opt.max_depth = static_cast<int>(spec.param("max_depth"));
      opt.min_leaf = static_cast<int>(spec.param("min_leaf"));
      return {spec, std::move(features), TreeParameters{tree::build(x, labels, opt)}};
    }
    case LearnerKind::tnm_rule: break;
  }
  throw UnsupportedOperation("unhandled learner kind");
}

/// Signed SVM margin, or probability of class 1 for logistic and mlp, before
/// orientation is applied.
inline double decision_value(const TrainedModel& m, const Sample& s) {
  if (const auto* lin = std::get_if<LinearParameters>(&m.parameters())) {
    const double z = lin->weights.dot(detail::gather(s, m.feature_subset())) + lin->bias;
    return m.kind() == LearnerKind::logistic ? logistic::sigmoid(z) : z;
  }
  if (const auto* net = std::get_if<MlpParameters>(&m.parameters()))
    return detail::mlp_probability(*net, detail::gather(s, m.feature_subset()));
  throw UnsupportedOperation("decision_value is not defined for " + std::string(to_string(m.kind())));
}

/// Raw class before orientation. Ties go to class 0.
inline int raw_predict(const TrainedModel& m, const Sample& s) {
  return std::visit(
      [&](const auto& p) -> int {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, TnmRuleParameters>) {
          if (!s.tnm_stage) throw PreconditionError("tnm_rule needs the sample's tnm stage");
          return *s.tnm_stage <= 2 ? 1 : 0;
        } else if constexpr (std::is_same_v<P, TreeParameters>) {
          const Eigen::VectorXd x = detail::gather(s, m.feature_subset());
          return tree::predict(p.nodes, x);
        } else if constexpr (std::is_same_v<P, LinearParameters>) {
          return decision_value(m, s) > (m.kind() == LearnerKind::logistic ? 0.5 : 0.0) ? 1 : 0;
        } else {
          return decision_value(m, s) > 0.5 ? 1 : 0;
        }
      },
      m.parameters());
}

inline int predict(const TrainedModel& m, const Sample& s) {
  const int raw = raw_predict(m, s);
  return m.orientation() == Orientation::inverted ? 1 - raw : raw;
}

inline int predict(const TrainedModel& m, const Dataset& d, std::size_t row) { return predict(m, sample_at(d, row)); }

inline std::vector<int> predict_all(const TrainedModel& m, const Dataset& d) {
  std::vector<int> out(d.n_samples());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict(m, d, i);
  return out;
}

}  // namespace agreelearn
