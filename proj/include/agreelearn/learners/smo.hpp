#pragma once

// Sequential minimal optimization for the soft-margin SVM dual
//
//   min_a  f(a) = 1/2 a'Qa - e'a,   Q_ij = y_i y_j K_ij
//   s.t.   0 <= a_i <= C,  y'a = 0
//
// Each step picks the maximal KKT-violating pair (i in I_up maximizing
// -y_i grad_i, j in I_low minimizing it) and solves the two-variable
// subproblem analytically. Converged once the violation gap is below tol.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace agreelearn::smo {

struct Options {
  double c = 1.0;
  double tol = 1e-3;
  std::size_t max_updates = 1000000;
  bool record_objective = false;
};

struct Result {
  Eigen::VectorXd alpha;
  double bias = 0.0;  // decision(x) = sum_i alpha_i y_i K(x_i, x) + bias
  std::size_t updates = 0;
  bool converged = false;
  double violation = 0.0;  // final max_{I_up} -y g  -  min_{I_low} -y g
  std::vector<double> objective;  // dual objective (maximization form) after each update
};

/// sum(a) - 1/2 a'Qa, the quantity SMO increases.
inline double dual_objective(const Eigen::MatrixXd& kernel, std::span<const int> y, const Eigen::VectorXd& alpha) {
  Eigen::VectorXd ya(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) ya(i) = y[static_cast<std::size_t>(i)] * alpha(i);
  return alpha.sum() - 0.5 * ya.dot(kernel * ya);
}

/// y entries are +1 / -1.
inline Result solve(const Eigen::MatrixXd& kernel, std::span<const int> y, const Options& opt) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const double c = opt.c;
  constexpr double tau = 1e-12;
  auto yi = [&](Eigen::Index i) { return static_cast<double>(y[static_cast<std::size_t>(i)]); };
  auto q = [&](Eigen::Index i, Eigen::Index j) { return yi(i) * yi(j) * kernel(i, j); };

  Result r;
  r.alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd& a = r.alpha;
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);

  auto in_up = [&](Eigen::Index t) { return (yi(t) > 0 && a(t) < c) || (yi(t) < 0 && a(t) > 0); };
  auto in_low = [&](Eigen::Index t) { return (yi(t) > 0 && a(t) > 0) || (yi(t) < 0 && a(t) < c); };

  while (true) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -yi(t) * grad(t);
      if (in_up(t) && v > gmax) gmax = v, i = t;
      if (in_low(t) && v < gmin) gmin = v, j = t;
    }
    r.violation = (i < 0 || j < 0) ? 0.0 : gmax - gmin;
    if (i < 0 || j < 0 || r.violation < opt.tol) {
      r.converged = true;
      break;
    }
    if (r.updates >= opt.max_updates) break;

    const double old_i = a(i), old_j = a(j);
    if (yi(i) != yi(j)) {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = a(i) - a(j);
      a(i) += delta;
      a(j) += delta;
      if (diff > 0) {
        if (a(j) < 0) a(j) = 0, a(i) = diff;
      } else {
        if (a(i) < 0) a(i) = 0, a(j) = -diff;
      }
      if (diff > 0) {
        if (a(i) > c) a(i) = c, a(j) = c - diff;
      } else {
        if (a(j) > c) a(j) = c, a(i) = c + diff;
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
      if (quad <= 0) quad = tau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = a(i) + a(j);
      a(i) -= delta;
      a(j) += delta;
      if (sum > c) {
        if (a(i) > c) a(i) = c, a(j) = sum - c;
      } else {
        if (a(j) < 0) a(j) = 0, a(i) = sum;
      }
      if (sum > c) {
        if (a(j) > c) a(j) = c, a(i) = sum - c;
      } else {
        if (a(i) < 0) a(i) = 0, a(j) = sum;
      }
    }

    const double di = a(i) - old_i, dj = a(j) - old_j;
    for (Eigen::Index t = 0; t < n; ++t) grad(t) += q(t, i) * di + q(t, j) * dj;
    ++r.updates;
    if (opt.record_objective) r.objective.push_back(dual_objective(kernel, y, a));
  }

  // Bias from free multipliers; midpoint of the feasible interval otherwise.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = yi(t) * grad(t);
    const bool at_upper = a(t) >= c, at_lower = a(t) <= 0;
    if (at_upper) {
      if (yi(t) < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (at_lower) {
      if (yi(t) > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  double rho;
  if (n_free > 0) rho = sum_free / static_cast<double>(n_free);
  else if (std::isfinite(ub) && std::isfinite(lb)) rho = 0.5 * (ub + lb);
  else rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
  r.bias = -rho;
  return r;
}

}  // namespace agreelearn::smo
