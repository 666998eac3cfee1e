#include <catch_amalgamated.hpp>

#include <agreelearn/learners/learner.hpp>

#include "oracles.hpp"

using namespace agreelearn;

namespace {

struct SmoFixture {
  Eigen::MatrixXd k;
  std::vector<int> y;
};

SmoFixture random_fixture(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < 2; ++j) x(i, j) = normal(rng);
  SmoFixture f{x * x.transpose(), std::vector<int>(static_cast<std::size_t>(n))};
  for (auto& v : f.y) v = rng() % 2 ? 1 : -1;
  f.y[0] = 1;
  f.y[1] = -1;
  return f;
}

void check_kkt(const SmoFixture& f, const smo::Result& r, double c, double tol) {
  const auto n = static_cast<Eigen::Index>(f.y.size());
  double eq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = f.y[static_cast<std::size_t>(i)];
    eq += yi * r.alpha(i);
    REQUIRE(r.alpha(i) >= -1e-12);
    REQUIRE(r.alpha(i) <= c + 1e-12);
    double margin = r.bias;
    for (Eigen::Index j = 0; j < n; ++j) margin += r.alpha(j) * f.y[static_cast<std::size_t>(j)] * f.k(j, i);
    margin *= yi;
    if (r.alpha(i) < 1e-9) CHECK(margin >= 1 - tol);
    else if (r.alpha(i) > c - 1e-9) CHECK(margin <= 1 + tol);
    else CHECK(std::abs(margin - 1) <= tol);
  }
  CHECK(std::abs(eq) < 1e-9);
}

Eigen::VectorXd pack(const mlp::Network& n) {
  const auto h = n.hidden_weights.size(), b = n.hidden_bias.size(), o = n.output_weights.size();
  Eigen::VectorXd p(h + b + o + 1);
  p << Eigen::Map<const Eigen::VectorXd>(n.hidden_weights.data(), h), n.hidden_bias, n.output_weights, n.output_bias;
  return p;
}

mlp::Network unpack(const Eigen::VectorXd& p, Eigen::Index inputs, Eigen::Index hidden) {
  auto n = mlp::Network::zeros(inputs, hidden);
  const auto h = n.hidden_weights.size();
  n.hidden_weights = Eigen::Map<const Eigen::MatrixXd>(p.data(), hidden, inputs);
  n.hidden_bias = p.segment(h, hidden);
  n.output_weights = p.segment(h + hidden, hidden);
  n.output_bias = p(p.size() - 1);
  return n;
}

std::vector<std::size_t> all_columns(const Dataset& d) {
  std::vector<std::size_t> f(d.n_attributes());
  std::iota(f.begin(), f.end(), 0);
  return f;
}

double training_accuracy(const TrainedModel& m, const Dataset& d) {
  const auto p = predict_all(m, d);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += p[i] == d.label_vector()[i];
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

}  // namespace

TEST_CASE("enumeration and grid oracles agree") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_fixture(rng, 2 + trial % 2);
    const double c = trial % 3 == 0 ? 0.5 : 4.0;
    const auto exact = oracle::svm_dual_enumerate(f.k, f.y, c);
    CHECK(exact.objective >= oracle::svm_dual_grid(f.k, f.y, c) - 1e-12);
    CHECK(exact.objective - oracle::svm_dual_grid(f.k, f.y, c) < 5e-3);
  }
}

TEST_CASE("SMO reaches the exact dual optimum on small problems") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + trial % 3);
    const auto f = random_fixture(rng, n);
    const double c = std::array{0.1, 1.0, 10.0}[static_cast<std::size_t>(trial) % 3];
    smo::Options opt;
    opt.c = c;
    opt.tol = 1e-8;
    const auto r = smo::solve(f.k, f.y, opt);
    REQUIRE(r.converged);
    const auto exact = oracle::svm_dual_enumerate(f.k, f.y, c);
    CHECK(std::abs(smo::dual_objective(f.k, f.y, r.alpha) - exact.objective) < 1e-3);
    CHECK(std::abs(oracle::dual_value(f.k, f.y, r.alpha) - exact.objective) < 1e-3);
    check_kkt(f, r, c, 1e-6);
  }
}

TEST_CASE("SMO on two mirrored points") {
  const Eigen::MatrixXd k{{1.0, -1.0}, {-1.0, 1.0}};
  const std::vector<int> y{1, -1};
  const auto r = smo::solve(k, y, smo::Options{});
  CHECK(std::abs(r.alpha(0) - 0.5) < 1e-9);
  CHECK(std::abs(r.alpha(1) - 0.5) < 1e-9);
  CHECK(std::abs(r.bias) < 1e-9);
}

TEST_CASE("SMO objective never decreases") {
  std::mt19937_64 rng(8);
  const auto f = random_fixture(rng, 30);
  smo::Options opt;
  opt.record_objective = true;
  const auto r = smo::solve(f.k, f.y, opt);
  for (std::size_t i = 1; i < r.objective.size(); ++i) CHECK(r.objective[i] >= r.objective[i - 1] - 1e-12);
}

TEST_CASE("svm_smo reports non-convergence") {
  const auto d = oracle::random_labeled(40, 5, 2);
  const auto spec = LearnerSpec{LearnerKind::svm_smo, {}, 0}.with("max_iters", 1).with("C", 100).with("tol", 1e-9);
  CHECK_THROWS_AS(fit(spec, d, all_columns(d)), ConvergenceError);
}

TEST_CASE("logistic gradient matches finite differences") {
  const auto d = oracle::random_labeled(30, 4, 3);
  const Eigen::MatrixXd x = d.values;
  Eigen::VectorXd y(30);
  for (Eigen::Index i = 0; i < 30; ++i) y(i) = d.label_vector()[static_cast<std::size_t>(i)];
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd p(5);
    for (auto& v : p) v = normal(rng);
    const double l2 = trial % 2 ? 0.3 : 0.0;
    const auto numeric = oracle::numeric_gradient([&](const Eigen::VectorXd& q) { return logistic::objective(x, y, q, l2); }, p);
    CHECK(oracle::relative_error(logistic::gradient(x, y, p, l2), numeric) < 1e-6);
  }
}

TEST_CASE("logistic with uninformative inputs predicts the base rate") {
  Matrix m = Matrix::Zero(10, 2);
  const auto d = make_dataset({"a", "b"}, m, std::vector<int>{0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
  const auto model = fit(LearnerSpec{LearnerKind::logistic, {}, 0}, d, all_columns(d));
  CHECK(std::abs(decision_value(model, sample_at(d, 0)) - 0.5) < 1e-9);
  CHECK(predict(model, d, 0) == 0);  // ties go to class 0
}

TEST_CASE("logistic recovers a separable-ish direction") {
  const auto d = oracle::random_labeled(200, 3, 9);
  auto e = d;
  for (std::size_t i = 0; i < 200; ++i) (*e.labels)[i] = e.values(static_cast<Eigen::Index>(i), 0) > 0;
  const auto model = fit(LearnerSpec{LearnerKind::logistic, {}, 0}.with("l2", 1e-3), e, all_columns(e));
  const auto& w = std::get<LinearParameters>(model.parameters()).weights;
  CHECK(w(0) > 5 * std::max(std::abs(w(1)), std::abs(w(2))));
  CHECK(training_accuracy(model, e) > 0.97);
}

TEST_CASE("mlp gradient matches finite differences") {
  const auto d = oracle::random_labeled(12, 3, 5);
  Eigen::VectorXd y(12);
  for (Eigen::Index i = 0; i < 12; ++i) y(i) = d.label_vector()[static_cast<std::size_t>(i)];
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto net = mlp::Network::random(3, 4, seed);
    const auto analytic = pack(mlp::gradient(net, d.values, y));
    const auto numeric = oracle::numeric_gradient(
        [&](const Eigen::VectorXd& p) { return mlp::loss(unpack(p, 3, 4), d.values, y); }, pack(net));
    CHECK(oracle::relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("mlp training lowers the loss and is seeded") {
  const auto d = oracle::random_labeled(40, 3, 6);
  const auto spec = LearnerSpec{LearnerKind::mlp, {}, 17};
  const auto a = fit(spec, d, all_columns(d));
  const auto b = fit(spec, d, all_columns(d));
  CHECK(predict_all(a, d) == predict_all(b, d));
  const auto& pa = std::get<MlpParameters>(a.parameters());
  const auto& pb = std::get<MlpParameters>(b.parameters());
  CHECK(pa.network.hidden_weights == pb.network.hidden_weights);
  const auto c = fit(LearnerSpec{LearnerKind::mlp, {}, 18}, d, all_columns(d));
  CHECK(std::get<MlpParameters>(c.parameters()).network.hidden_weights != pa.network.hidden_weights);

  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) y(i) = d.label_vector()[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd z = (d.values.rowwise() - pa.input_mean.transpose()).array().rowwise() /
                            pa.input_scale.transpose().array();
  CHECK(mlp::loss(pa.network, z, y) < mlp::loss(mlp::Network::random(3, 8, 17), z, y));
}

TEST_CASE("unbounded trees fit distinct training rows exactly") {
  for (auto kind : {LearnerKind::cart, LearnerKind::gainratio_tree}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto d = oracle::random_labeled(60, 4, seed);
      const auto spec = LearnerSpec{kind, {}, 0}.with("max_depth", 0).with("min_leaf", 1);
      const auto m = fit(spec, d, all_columns(d));
      CHECK(training_accuracy(m, d) == 1.0);
    }
  }
}

TEST_CASE("tree depth and leaf size limits") {
  const auto d = oracle::random_labeled(80, 3, 4);
  for (int depth : {1, 2, 3}) {
    const auto m = fit(LearnerSpec{LearnerKind::cart, {}, 0}.with("max_depth", depth), d, all_columns(d));
    CHECK(tree::depth(std::get<TreeParameters>(m.parameters()).nodes) <= depth);
  }
  const auto stump = fit(LearnerSpec{LearnerKind::cart, {}, 0}.with("min_leaf", 80), d, all_columns(d));
  CHECK(std::get<TreeParameters>(stump.parameters()).nodes.size() == 1);
}

TEST_CASE("linear learners ignore column order") {
  const auto d = oracle::random_labeled(50, 4, 12);
  const std::vector<std::size_t> forward{0, 1, 2, 3}, backward{3, 2, 1, 0};
  for (auto kind : {LearnerKind::svm_smo, LearnerKind::logistic}) {
    const auto spec = LearnerSpec{kind, {}, 0}.with("tol", 1e-9);
    CHECK(predict_all(fit(spec, d, forward), d) == predict_all(fit(spec, d, backward), d));
  }
}

TEST_CASE("tnm_rule") {
  Matrix m = Matrix::Zero(4, 1);
  auto d = make_dataset({"x"}, m, std::vector<int>{1, 1, 0, 0});
  CHECK_THROWS_AS(fit(LearnerSpec{LearnerKind::tnm_rule, {}, 0}, d, {}), PreconditionError);
  d.tnm_stage = std::vector<int>{1, 2, 3, 4};
  const auto rule = fit(LearnerSpec{LearnerKind::tnm_rule, {}, 0}, d, {});
  CHECK(predict_all(rule, d) == std::vector<int>{1, 1, 0, 0});
  CHECK(predict_all(rule.inverted(), d) == std::vector<int>{0, 0, 1, 1});
  CHECK_THROWS_AS(decision_value(rule, sample_at(d, 0)), UnsupportedOperation);
}

TEST_CASE("inversion flips every prediction and is an involution") {
  const auto d = oracle::random_labeled(40, 3, 13);
  for (auto kind : {LearnerKind::svm_smo, LearnerKind::logistic, LearnerKind::cart, LearnerKind::mlp}) {
    const auto m = fit(LearnerSpec{kind, {}, 3}, d, all_columns(d));
    const auto p = predict_all(m, d);
    const auto q = predict_all(m.inverted(), d);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] == 1 - p[i]);
    CHECK(predict_all(m.inverted().inverted(), d) == p);
  }
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS((LearnerSpec{LearnerKind::cart, {{"C", 1}}, 0}.validate()), PreconditionError);
  CHECK_THROWS_AS((LearnerSpec{LearnerKind::svm_smo, {{"C", -1}}, 0}.validate()), PreconditionError);
  CHECK_THROWS_AS((LearnerSpec{LearnerKind::mlp, {{"hidden_units", 1.5}}, 0}.validate()), PreconditionError);
  CHECK_THROWS_AS(parse_learner_kind("knn"), PreconditionError);
  for (auto k : kAllLearnerKinds) CHECK(parse_learner_kind(to_string(k)) == k);
  const auto d = oracle::random_labeled(10, 2, 1);
  auto one_class = d;
  one_class.labels = std::vector<int>(10, 1);
  CHECK_THROWS_AS(fit(LearnerSpec{LearnerKind::logistic, {}, 0}, one_class, all_columns(d)), PreconditionError);
  auto holes = d;
  holes.missing(3, 1) = true;
  CHECK_THROWS_AS(fit(LearnerSpec{LearnerKind::cart, {}, 0}, holes, all_columns(d)), PreconditionError);
}
