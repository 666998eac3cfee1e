// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (capped at 100).

#include <agreelearn/agreelearn.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>

#include "cli_support.hpp"
#include "oracles.hpp"

using namespace agreelearn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, const std::function<Outcome()>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  std::printf("%s  %2d  %s  [%s; %.2fs]\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
  failures += !o.pass;
}

void info(const std::string& text) {
  std::printf("INFO      %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const LearnerSpec kSvm{LearnerKind::svm_smo, {{"C", 1.0}}, 0};

double inverted_accuracy(const PredictionTable& t) { return 1.0 - t.accuracy(); }

// --- 1, 2: class-symmetric anti-learning --------------------------------------

Outcome nearest_centroid(double a, double b, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto d = gen_class_symmetric(8, a, b, seed);
  const auto correct = oracle::loo_nearest_centroid_correct(d);
  const double raw = static_cast<double>(correct) / static_cast<double>(d.n_samples());
  const double inv = 1.0 - raw;
  const double t = seconds_since(t0);
  return {raw == 0.0 && inv == 1.0 && t < 1.0,
          "raw=" + fmt("%.4f", raw) + " inverted=" + fmt("%.4f", inv) + " t=" + fmt("%.3fs", t)};
}

Outcome svm_diagnosis(double a, double b) {
  const auto t0 = Clock::now();
  int anti = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto r = diagnose(kSvm, gen_class_symmetric(8, a, b, seed), CVSpec::loo());
    anti += r.verdict == Verdict::anti_learnable;
  }
  const double t = seconds_since(t0);
  return {anti >= 9 && t < 10.0, std::to_string(anti) + "/10 seeds anti_learnable, t=" + fmt("%.2fs", t)};
}

// --- 6: monotonicity along random chains ---------------------------------------

Outcome monotone_chains() {
  std::mt19937_64 rng(20240601);
  std::size_t violations = 0, steps = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng() % 7;
    const std::size_t n = 5 + rng() % 60;
    VoteMatrix votes(n, std::vector<int>(m));
    std::vector<int> labels(n);
    const int bias = static_cast<int>(rng() % 4);  // vary how often members agree
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng() % 2);
      for (auto& v : votes[i]) v = rng() % 4 < static_cast<unsigned>(bias) ? labels[i] : static_cast<int>(rng() % 2);
    }
    for (int chain = 0; chain < 5; ++chain) {
      std::vector<std::size_t> order(m);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      SubsetMask mask = 0;
      std::size_t previous = n;
      for (auto member : order) {
        mask |= SubsetMask{1} << member;
        const auto now = tally_subset(votes, labels, mask).n_matches;
        violations += now > previous;
        previous = now;
        ++steps;
      }
    }
  }
  return {violations == 0, std::to_string(violations) + " violations over " + std::to_string(steps) + " chain steps"};
}

// --- 7: accuracy-coverage tradeoff ---------------------------------------------

Outcome tradeoff(std::uint64_t seed) {
  const auto t0 = Clock::now();
  const auto d = gen_mixture(400, 0.5, seed).data;
  const auto all = all_features(d);
  std::vector<EnsembleMember> members{
      {"svm", {LearnerKind::svm_smo, {}, 0}, ExplicitFeatures{all}, OrientationPolicy::normal},
      {"cart", {LearnerKind::cart, {}, 0}, ExplicitFeatures{all}, OrientationPolicy::normal},
      {"logistic", {LearnerKind::logistic, {}, 0}, ExplicitFeatures{all}, OrientationPolicy::auto_select},
      {"gainratio", {LearnerKind::gainratio_tree, {}, 0}, ExplicitFeatures{all}, OrientationPolicy::auto_select},
  };
  const auto ev = evaluate_subsets(members, d, CVSpec::kfold(10, seed));
  double best_single = 0.0;
  std::size_t single_coverage = 0;
  const SubsetReport* full = nullptr;
  for (const auto& r : ev.subsets) {
    if (r.size == 1) {
      best_single = std::max(best_single, r.accuracy.value_or(0.0));
      single_coverage = std::max(single_coverage, r.n_matches);
    }
    if (r.size == members.size()) full = &r;
  }
  const double full_acc = full->accuracy.value_or(0.0);
  const double t = seconds_since(t0);
  const bool ok = full_acc - best_single >= 0.05 && full->n_matches < single_coverage && t < 120.0;
  return {ok, "full=" + fmt("%.4f", full_acc) + " on " + std::to_string(full->n_matches) + "/400, best single=" +
                  fmt("%.4f", best_single) + " on " + std::to_string(single_coverage) + "/400, gain=" +
                  fmt("%+.4f", full_acc - best_single)};
}

// --- 8: solver correctness -----------------------------------------------------

Outcome solvers() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> normal;
  double worst_gap = 0.0, worst_kkt = 0.0;
  std::size_t instances = 0, converged = 0;
  for (Eigen::Index n = 2; n <= 4; ++n) {
    for (int rep = 0; rep < 40; ++rep) {
      for (double c : {0.05, 1.0, 20.0}) {
        Eigen::MatrixXd x(n, 3);
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = 0; j < 3; ++j) x(i, j) = normal(rng);
        std::vector<int> y(static_cast<std::size_t>(n));
        for (auto& v : y) v = rng() % 2 ? 1 : -1;
        y[0] = 1;
        y[1] = -1;
        const Eigen::MatrixXd k = x * x.transpose();
        smo::Options opt;
        opt.c = c;
        const auto r = smo::solve(k, y, opt);
        ++instances;
        const auto exact = oracle::svm_dual_enumerate(k, y, c);
        worst_gap = std::max(worst_gap, std::abs(oracle::dual_value(k, y, r.alpha) - exact.objective));
        if (!r.converged) continue;
        ++converged;
        // KKT: with f(x_i) = sum_j a_j y_j K_ji + b, y_i f(x_i) >= 1 at a_i = 0, <= 1 at C, = 1 in between.
        for (Eigen::Index i = 0; i < n; ++i) {
          double f = r.bias;
          for (Eigen::Index j = 0; j < n; ++j) f += r.alpha(j) * y[static_cast<std::size_t>(j)] * k(j, i);
          const double m = y[static_cast<std::size_t>(i)] * f;
          double v = 0.0;
          if (r.alpha(i) <= 0.0) v = std::max(0.0, 1.0 - m);
          else if (r.alpha(i) >= c) v = std::max(0.0, m - 1.0);
          else v = std::abs(m - 1.0);
          worst_kkt = std::max(worst_kkt, v);
        }
      }
    }
  }

  double worst_logit = 0.0, worst_mlp = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto d = oracle::random_labeled(25, 4, seed);
    Eigen::VectorXd y(25);
    for (Eigen::Index i = 0; i < 25; ++i) y(i) = d.label_vector()[static_cast<std::size_t>(i)];
    Eigen::VectorXd p(5);
    for (auto& v : p) v = normal(rng);
    const double l2 = seed % 2 ? 0.1 : 0.0;
    const auto fd = oracle::numeric_gradient([&](const Eigen::VectorXd& q) { return logistic::objective(d.values, y, q, l2); }, p);
    worst_logit = std::max(worst_logit, oracle::relative_error(logistic::gradient(d.values, y, p, l2), fd));

    const auto net = mlp::Network::random(4, 5, seed);
    const auto g = mlp::gradient(net, d.values, y);
    auto flat = [](const mlp::Network& w) {
      Eigen::VectorXd v(w.hidden_weights.size() + w.hidden_bias.size() + w.output_weights.size() + 1);
      v << Eigen::Map<const Eigen::VectorXd>(w.hidden_weights.data(), w.hidden_weights.size()), w.hidden_bias,
          w.output_weights, w.output_bias;
      return v;
    };
    const auto fd_net = oracle::numeric_gradient(
        [&](const Eigen::VectorXd& q) {
          auto w = mlp::Network::zeros(4, 5);
          w.hidden_weights = Eigen::Map<const Eigen::MatrixXd>(q.data(), 5, 4);
          w.hidden_bias = q.segment(20, 5);
          w.output_weights = q.segment(25, 5);
          w.output_bias = q(30);
          return mlp::loss(w, d.values, y);
        },
        flat(net));
    worst_mlp = std::max(worst_mlp, oracle::relative_error(flat(g), fd_net));
  }
  const double tol = smo::Options{}.tol;
  const bool ok = worst_gap < 1e-3 && worst_kkt <= tol && worst_logit < 1e-6 && worst_mlp < 1e-4;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%zu QPs (%zu converged): max |dual gap|=%.2e, max KKT violation=%.2e (tol %.0e); "
                "FD rel err logistic=%.2e mlp=%.2e",
                instances, converged, worst_gap, worst_kkt, tol, worst_logit, worst_mlp);
  return {ok, buf};
}

// --- 9: Kaplan-Meier fixtures --------------------------------------------------

Outcome km_fixtures() {
  const auto a = kaplan_meier(std::vector<SurvivalRecord>{{10, true}, {20, true}});
  const auto b = kaplan_meier(std::vector<SurvivalRecord>{{10, false}, {20, true}});
  auto steps = [](const KMCurve& c) {
    std::vector<std::pair<double, double>> s;
    for (const auto& p : c.points) s.emplace_back(p.time, p.survival);
    return s;
  };
  const bool first = steps(a) == std::vector<std::pair<double, double>>{{0, 1}, {10, 0.5}, {20, 0}} &&
                     a.survival_at(9.5) == 1.0 && a.survival_at(15) == 0.5;
  const bool second = steps(b) == std::vector<std::pair<double, double>>{{0, 1}, {20, 0}} && b.survival_at(19.9) == 1.0;
  return {first && second, std::string("deaths at 10,20: ") + (first ? "exact" : "mismatch") +
                               "; censored at 10, death at 20: " + (second ? "exact" : "mismatch")};
}

// --- 10: CLI determinism -------------------------------------------------------

Outcome determinism() {
  cli::TempDir dir("acceptance");
  cli::spit(dir / "cohort.csv", cli::cohort_csv(60, 8));
  const std::string cohort = dir / "cohort.csv";
  const std::vector<std::string> staged{"--months", "months", "--event", "event", "--tnm", "tnm_stage"};
  cli::spit(dir / "members.json", R"({"schema": "agreelearn-members/1", "members": [
    {"name": "svm", "learner": {"kind": "svm_smo"}, "features": {"type": "best_k", "evaluator": "svm_rfe", "k": 4}},
    {"name": "mlp", "learner": {"kind": "mlp", "params": {"epochs": 100}},
     "features": {"type": "explicit", "attributes": ["f0", "f1", "f2"]}, "orientation": "auto"}]})");

  // Inputs for the later commands come from a single-threaded first pass.
  auto prep = [&](std::vector<std::string> args, const std::string& out) {
    args.insert(args.end(), {"--seed", "5", "--threads", "1", "--out", dir / out});
    if (cli::run(args).exit_code != 0) throw std::runtime_error("preparing '" + args.front() + "' failed");
  };
  prep({"generate", "mixture", "--n", "120"}, "mixture");
  prep({"rank", "--input", cohort, "--evaluator", "svm_rfe"}, "ranking");
  prep({"fit", "--input", cohort, "--learner", "logistic"}, "model");
  prep({"diagnose", "--input", cohort, "--learner", "cart"}, "diag");

  auto plus = [&](std::vector<std::string> a) {
    a.insert(a.end(), staged.begin(), staged.end());
    return a;
  };
  const std::vector<std::vector<std::string>> commands{
      {"generate", "class_symmetric", "--a", "0.1", "--b", "0.2"},
      {"generate", "hadamard", "--order", "32"},
      {"generate", "polynomial", "--n", "200"},
      {"generate", "merged_xor", "--n", "64"},
      {"generate", "mixture", "--n", "400"},
      {"rank", "--input", cohort, "--evaluator", "svm_rfe"},
      {"rank", "--input", cohort, "--evaluator", "chi_squared"},
      {"rank", "--input", cohort, "--evaluator", "info_gain"},
      {"sweep", "--input", cohort, "--ranking", dir / "ranking/ranking.csv", "--k-max", "6", "--end", "worst"},
      {"diagnose", "--input", dir / "mixture/dataset.csv", "--learner", "mlp", "--epochs", "200"},
      {"diagnose", "--input", cohort, "--learner", "svm_smo", "--cv", "loo", "--inverted"},
      {"fit", "--input", cohort, "--learner", "gainratio_tree", "--orientation", "auto"},
      {"predict", "--input", cohort, "--model", dir / "model/model.json"},
      plus({"ensemble", "--input", cohort, "--default-roster", "--roster-evaluator", "chi_squared", "--cv", "kfold:5", "--ease",
            "--markers", "a0,a1,a2"}),
      {"ensemble", "--input", dir / "mixture/dataset.csv", "--members", dir / "members.json", "--cv", "kfold:5"},
      {"survival", "--input", cohort},
      {"survival", "--input", cohort, "--predictions", dir / "diag/predictions.csv"},
  };
  std::size_t identical = 0;
  std::string first_mismatch;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::map<std::string, std::string> reference;
    bool same = true;
    int runs = 0;
    for (const char* threads : {"1", "4", "4"}) {
      auto args = commands[c];
      const std::string out = dir / ("run" + std::to_string(c) + "_" + std::to_string(runs++));
      args.insert(args.end(), {"--seed", "5", "--threads", threads, "--out", out});
      const auto r = cli::run(args);
      if (r.exit_code != 0) throw std::runtime_error("'" + commands[c].front() + "' exited " + std::to_string(r.exit_code) + ": " + r.output);
      const auto snap = cli::snapshot(out);
      if (runs == 1) reference = snap;
      else same = same && snap == reference;
    }
    identical += same;
    if (!same && first_mismatch.empty()) first_mismatch = commands[c].front() + " #" + std::to_string(c);
  }
  return {identical == commands.size(),
          std::to_string(identical) + "/" + std::to_string(commands.size()) +
              " invocations byte-identical over 3 runs (threads 1, 4, 4)" +
              (first_mismatch.empty() ? "" : ", first mismatch: " + first_mismatch)};
}

}  // namespace

int main() {
  std::printf("agreelearn acceptance\n");

  criterion(1, "class-symmetric (8, a=0.1, b=0.4): LOO nearest centroid raw 0.00, inverted 1.00, < 1 s",
            [] { return nearest_centroid(0.1, 0.4, 1); });
  criterion(2, "class-symmetric (8, a=0.1, b=0.4): SVM C=1 LOO anti_learnable on >= 9/10 seeds, < 10 s",
            [] { return svm_diagnosis(0.1, 0.4); });
  {
    const auto feasible = nearest_centroid(0.1, 0.2, 1);
    info("not a criterion: class-symmetric (8, a=0.1, b=0.2) nearest centroid " + feasible.detail);
    const auto svm = svm_diagnosis(0.1, 0.2);
    info("not a criterion: class-symmetric (8, a=0.1, b=0.2) SVM LOO " + svm.detail);
  }

  criterion(3, "polynomial(1000): mlp defaults, 10-fold pooled accuracy >= 0.90, < 60 s", [] {
    const auto t0 = Clock::now();
    const auto d = gen_polynomial(1000, 1);
    const LearnerSpec mlp{LearnerKind::mlp, {}, 1};
    const double acc = cross_validate(mlp, d, all_features(d), CVSpec::kfold(10, 1)).accuracy();
    const double t = seconds_since(t0);
    return Outcome{acc >= 0.90 && t < 60.0, "accuracy=" + fmt("%.4f", acc)};
  });

  criterion(4, "merged_xor(64): SVM normal and inverted 10-fold both in [0.35, 0.65] on >= 9/10 seeds, < 30 s", [] {
    const auto t0 = Clock::now();
    int inside = 0;
    double lo = 1.0, hi = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto d = gen_merged_xor(64, seed);
      const auto table = cross_validate(kSvm, d, all_features(d), CVSpec::kfold(10, seed));
      const double normal = table.accuracy(), inverted = inverted_accuracy(table);
      lo = std::min(lo, normal);
      hi = std::max(hi, normal);
      inside += normal >= 0.35 && normal <= 0.65 && inverted >= 0.35 && inverted <= 0.65;
    }
    const double t = seconds_since(t0);
    return Outcome{inside >= 9 && t < 30.0, std::to_string(inside) + "/10 seeds inside, normal accuracy range " +
                                                fmt("%.4f", lo) + ".." + fmt("%.4f", hi)};
  });

  criterion(5, "6 members: 63 subsets, size histogram 6/15/20/15/6/1", [] {
    const auto masks = enumerate_subsets(6);
    std::map<int, int> hist;
    for (auto m : masks) ++hist[std::popcount(m)];
    std::map<int, int> direct;  // every non-zero 6-bit mask
    for (SubsetMask m = 1; m < 64; ++m) ++direct[std::popcount(m)];
    const bool ok = masks.size() == 63 && std::set<SubsetMask>(masks.begin(), masks.end()).size() == 63 &&
                    hist == direct && hist == std::map<int, int>{{1, 6}, {2, 15}, {3, 20}, {4, 15}, {5, 6}, {6, 1}};
    std::string h;
    for (auto [size, count] : hist) h += (h.empty() ? "" : "/") + std::to_string(count);
    return Outcome{ok, std::to_string(masks.size()) + " subsets, histogram " + h};
  });

  criterion(6, "agreement monotonicity over 200 random vote matrices and subset chains", monotone_chains);

  criterion(7, "mixture(400, 0.5): full agreement beats best single member by >= 0.05 with lower coverage, < 2 min",
            [] { return tradeoff(1); });

  criterion(8, "SMO vs QP oracle within 1e-3, KKT within tol, logistic FD < 1e-6, MLP FD < 1e-4", solvers);

  criterion(9, "Kaplan-Meier hand-computed product-limit fixtures reproduce exactly", km_fixtures);

  criterion(10, "every CLI command re-run with the same flags and seed is byte-identical, serial and parallel",
            determinism);

  std::printf("%d criterion(s) failing\n", failures);
  return std::min(failures, 100);
}
