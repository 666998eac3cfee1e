// Diagnoses a Hadamard dataset, then scores a small agreement ensemble on a
// learnable/unlearnable mixture.

#include <agreelearn/agreelearn.hpp>

#include <iostream>

int main() {
  using namespace agreelearn;

  const Dataset hadamard = gen_hadamard(16, 1);
  const LearnerSpec svm{LearnerKind::svm_smo, {}, 0};
  const auto report = diagnose(svm, hadamard, CVSpec::loo());
  std::cout << "hadamard/16, svm, loo: accuracy " << report.cv_accuracy << ", p " << report.p_value << ", "
            << to_string(report.verdict) << '\n';

  const auto mixture = gen_mixture(200, 0.5, 7).data;
  const std::vector<std::size_t> all = all_features(mixture);
  const std::vector<EnsembleMember> members{
      {"svm", svm, ExplicitFeatures{all}, OrientationPolicy::normal},
      {"logistic", {LearnerKind::logistic, {}, 0}, ExplicitFeatures{all}, OrientationPolicy::normal},
      {"cart", {LearnerKind::cart, {}, 0}, ExplicitFeatures{all}, OrientationPolicy::auto_select},
  };
  const auto ev = evaluate_subsets(members, mixture, CVSpec::kfold(10, 3));
  for (const auto& s : ev.subsets) {
    std::cout << io::join_names(s.names) << ": " << s.n_matches << " matches";
    if (s.accuracy) std::cout << ", accuracy " << *s.accuracy;
    std::cout << '\n';
  }
}
