#pragma once

// Synthetic populations with known learnability: class-symmetric and Hadamard
// sets are anti-learnable, the polynomial set is learnable, their XOR merge is
// neither, and the mixture has an easy and a hard sub-population.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "agreelearn/dataset.hpp"
#include "agreelearn/error.hpp"
#include "agreelearn/parallel.hpp"

namespace agreelearn {

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

inline Eigen::MatrixXd random_orthogonal(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ();
}

}  // namespace detail

/// Gram matrix of the class-symmetric construction: unit diagonal,
/// `within` between samples of the same class, `between` across classes.
/// Samples 0..n-1 are class 0, n..2n-1 class 1.
inline Eigen::MatrixXd class_symmetric_gram(int n_per_class, double within, double between) {
  const Eigen::Index m = 2 * n_per_class;
  Eigen::MatrixXd g(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      const bool same = (i < n_per_class) == (j < n_per_class);
      g(i, j) = i == j ? 1.0 : (same ? within : between);
    }
  return g;
}

/// Largest between-class similarity that keeps the Gram matrix PSD for a
/// given within-class similarity (the class-contrast eigenvalue
/// 1 + (n-1)a - n b reaches zero there).
inline double class_symmetric_max_between(int n_per_class, double within) {
  return (1.0 + (n_per_class - 1) * within) / n_per_class;
}

inline Dataset gen_class_symmetric(int n_per_class, double within, double between, std::uint64_t seed) {
  if (n_per_class < 2) throw PreconditionError("class_symmetric needs at least 2 samples per class");
  if (!(between > within))
    throw PreconditionError("between-class similarity must exceed within-class");

  const Eigen::MatrixXd gram = class_symmetric_gram(n_per_class, within, between);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig < -1e-10) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "class-symmetric Gram matrix is not positive semidefinite (minimum eigenvalue " << min_eig
        << "; between-class similarity must not exceed "
        << class_symmetric_max_between(n_per_class, within) << " for this within-class value)";
    throw PreconditionError(msg.str());
  }

  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::mt19937_64 rng(seed);
  const Eigen::Index m = gram.rows();
  // Any orthogonal rotation of the factor reproduces the same Gram matrix.
  const Eigen::MatrixXd points =
      eig.eigenvectors() * root.asDiagonal() * detail::random_orthogonal(m, rng);
  const auto order = detail::shuffled_indices(static_cast<std::size_t>(m), rng);

  Matrix values(m, m);
  std::vector<int> labels(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto src = static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)]);
    values.row(r) = points.row(src);
    labels[static_cast<std::size_t>(r)] = src < n_per_class ? 0 : 1;
  }
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < m; ++j) names.push_back("s" + std::to_string(j));
  return make_dataset(std::move(names), std::move(values), std::move(labels));
}

/// Sylvester Hadamard matrix of order 2^k with its all-ones row and column
/// removed. Rows are samples; label = Sylvester row index mod 2, so odd rows
/// (the majority) are class 1.
inline Dataset gen_hadamard(int order, std::uint64_t seed) {
  if (order < 4 || (order & (order - 1)) != 0)
    throw PreconditionError("hadamard order must be a power of two >= 4, got " + std::to_string(order));
  std::vector<std::vector<int>> h{{1}};
  while (static_cast<int>(h.size()) < order) {
    const std::size_t s = h.size();
    std::vector<std::vector<int>> next(2 * s, std::vector<int>(2 * s));
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) {
        next[i][j] = next[i][j + s] = next[i + s][j] = h[i][j];
        next[i + s][j + s] = -h[i][j];
      }
    h = std::move(next);
  }

  const auto m = static_cast<std::size_t>(order - 1);
  std::mt19937_64 rng(seed);
  const auto order_idx = detail::shuffled_indices(m, rng);
  Matrix values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  std::vector<int> labels(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t src = order_idx[r];
    for (std::size_t j = 0; j < m; ++j)
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = h[src + 1][j + 1];
    labels[r] = static_cast<int>((src + 1) % 2);  // parity of the Sylvester row index
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < m; ++j) names.push_back("h" + std::to_string(j + 1));
  return make_dataset(std::move(names), std::move(values), std::move(labels));
}

inline double polynomial_score(double x, double y, double z) { return x + 1.0 / y - z; }

/// label = 1 iff score is strictly above the sample median.
inline std::vector<int> median_split_labels(const std::vector<double>& scores) {
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<int> labels;
  labels.reserve(n);
  for (double s : scores) labels.push_back(s > median ? 1 : 0);
  return labels;
}

inline Dataset gen_polynomial(int n, std::uint64_t seed) {
  if (n < 20) throw PreconditionError("polynomial generator needs n >= 20");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xz(1.0, 10.0), yd(0.5, 2.0);
  Matrix values(n, 3);
  std::vector<double> scores(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = xz(rng), y = yd(rng), z = xz(rng);
    values(i, 0) = x;
    values(i, 1) = y;
    values(i, 2) = z;
    scores[static_cast<std::size_t>(i)] = polynomial_score(x, y, z);
  }
  return make_dataset({"x", "y", "z"}, std::move(values), median_split_labels(scores));
}

struct MergedXorOptions {
  double within = 0.1;
  // Unset: halfway between `within` and the largest PSD-feasible value.
  std::optional<double> between;
};

/// Row i joins class-symmetric sample i and polynomial sample i; the label is
/// the XOR of their labels.
inline Dataset gen_merged_xor(int n, std::uint64_t seed, const MergedXorOptions& opts = {}) {
  if (n < 16 || n % 2 != 0) throw PreconditionError("merged_xor needs an even n >= 16");
  const int per_class = n / 2;
  const double between =
      opts.between.value_or(0.5 * (opts.within + class_symmetric_max_between(per_class, opts.within)));
  const Dataset sym = gen_class_symmetric(per_class, opts.within, between, derive_seed(seed, 1));
  const Dataset poly = gen_polynomial(std::max(n, 20), derive_seed(seed, 2));

  const auto ps = static_cast<Eigen::Index>(sym.n_attributes());
  Matrix values(n, ps + 3);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    values.row(i).head(ps) = sym.values.row(i);
    values.row(i).tail(3) = poly.values.row(i);
    labels[static_cast<std::size_t>(i)] =
        sym.label_vector()[static_cast<std::size_t>(i)] ^ poly.label_vector()[static_cast<std::size_t>(i)];
  }
  std::vector<std::string> names = sym.attributes;
  names.insert(names.end(), poly.attributes.begin(), poly.attributes.end());
  return make_dataset(std::move(names), std::move(values), std::move(labels));
}

struct MixtureData {
  Dataset data;
  std::vector<bool> easy;  // hidden sub-population tag, for diagnostics only
};

inline constexpr int kMixtureAttributes = 6;
inline constexpr double kMixtureLabelNoise = 0.05;
inline constexpr double kMixtureHardBand = 0.1;

/// Easy rows: x ~ N(0, I), label = [w.x > 0] with 5% flips. Hard rows: a fair
/// coin label, with x drawn from N(0, I) and pulled into a band of width
/// kMixtureHardBand (in units of w.x / |w|) around the easy decision boundary.
inline MixtureData gen_mixture(int n, double frac_easy, std::uint64_t seed) {
  if (!(frac_easy > 0.0 && frac_easy < 1.0)) throw PreconditionError("frac_easy must lie in (0, 1)");
  if (n < 10) throw PreconditionError("mixture generator needs n >= 10");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5), flip(kMixtureLabelNoise);
  // two informative attributes, four pure noise
  static constexpr double weights[kMixtureAttributes] = {1.0, 0.5, 0.0, 0.0, 0.0, 0.0};
  double weight_norm = 0.0;
  for (double w : weights) weight_norm += w * w;
  weight_norm = std::sqrt(weight_norm);

  const auto n_easy = static_cast<std::size_t>(std::lround(frac_easy * n));
  std::vector<bool> easy(static_cast<std::size_t>(n), false);
  std::fill(easy.begin(), easy.begin() + static_cast<std::ptrdiff_t>(n_easy), true);
  std::shuffle(easy.begin(), easy.end(), rng);

  Matrix values(n, kMixtureAttributes);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double score = 0.0;
    for (int j = 0; j < kMixtureAttributes; ++j) {
      values(i, j) = normal(rng);
      score += weights[j] * values(i, j);
    }
    const bool is_easy = easy[static_cast<std::size_t>(i)];
    if (!is_easy) {
      const double target = kMixtureHardBand * normal(rng) * weight_norm;
      for (int j = 0; j < kMixtureAttributes; ++j)
        values(i, j) += (target - score) * weights[j] / (weight_norm * weight_norm);
      score = target;
    }
    int label = is_easy ? (score > 0.0 ? 1 : 0) : (coin(rng) ? 1 : 0);
    if (is_easy && flip(rng)) label = 1 - label;
    labels[static_cast<std::size_t>(i)] = label;
  }
  std::vector<std::string> names;
  for (int j = 0; j < kMixtureAttributes; ++j) names.push_back("f" + std::to_string(j));
  return {make_dataset(std::move(names), std::move(values), std::move(labels)), std::move(easy)};
}

}  // namespace agreelearn
