#pragma once

// L2-penalized logistic regression fitted by Newton's method (IRLS).
// Parameter vector: [intercept, w_1 .. w_p]; the intercept is not penalized.
// Objective (maximized): mean log-likelihood - l2/2 * ||w||^2.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>

namespace agreelearn::logistic {

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& x, const Eigen::VectorXd& params) {
  return (x * params.tail(x.cols())).array() + params(0);
}

inline double objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& params,
                        double l2) {
  const Eigen::VectorXd z = linear_predictor(x, params);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) ll += y(i) * z(i) - softplus(z(i));
  return ll / static_cast<double>(x.rows()) - 0.5 * l2 * params.tail(x.cols()).squaredNorm();
}

inline Eigen::VectorXd gradient(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& params,
                                double l2) {
  const Eigen::VectorXd z = linear_predictor(x, params);
  Eigen::VectorXd resid(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) resid(i) = y(i) - sigmoid(z(i));
  const double n = static_cast<double>(x.rows());
  Eigen::VectorXd g(params.size());
  g(0) = resid.sum() / n;
  g.tail(x.cols()) = x.transpose() * resid / n - l2 * params.tail(x.cols());
  return g;
}

/// Negated Hessian of the objective (positive semidefinite).
inline Eigen::MatrixXd information(const Eigen::MatrixXd& x, const Eigen::VectorXd& params, double l2) {
  const Eigen::Index p = x.cols();
  const Eigen::VectorXd z = linear_predictor(x, params);
  Eigen::MatrixXd design(x.rows(), p + 1);
  design.col(0).setOnes();
  design.rightCols(p) = x;
  Eigen::VectorXd w(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double s = sigmoid(z(i));
    w(i) = s * (1.0 - s);
  }
  Eigen::MatrixXd h = design.transpose() * w.asDiagonal() * design / static_cast<double>(x.rows());
  h.diagonal().tail(p).array() += l2;
  return h;
}

struct FitResult {
  Eigen::VectorXd params;
  std::size_t iterations = 0;
  double gradient_norm = 0.0;  // infinity norm at exit
  bool converged = false;
};

inline FitResult fit_newton(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2, double tol,
                            std::size_t max_iters) {
  FitResult r;
  r.params = Eigen::VectorXd::Zero(x.cols() + 1);
  double f = objective(x, y, r.params, l2);
  Eigen::VectorXd g = gradient(x, y, r.params, l2);
  for (;;) {
    r.gradient_norm = g.lpNorm<Eigen::Infinity>();
    if (r.gradient_norm < tol) {
      r.converged = true;
      return r;
    }
    if (r.iterations >= max_iters) return r;
    ++r.iterations;

    Eigen::MatrixXd h = information(x, r.params, l2);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    Eigen::VectorXd step = ldlt.solve(g);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || ldlt.vectorD().minCoeff() <= 0) {
      // Singular information (e.g. separable data, collinear columns): damp.
      const double ridge = 1e-8 + 1e-6 * h.diagonal().maxCoeff();
      h.diagonal().array() += ridge;
      step = h.ldlt().solve(g);
    }

    // Backtracking on the objective. Near the optimum the objective can stop
    // changing in floating point while the gradient still shrinks; accept such
    // steps too.
    const double slope = g.dot(step);
    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      Eigen::VectorXd cand = r.params + t * step;
      const double fc = objective(x, y, cand, l2);
      if (!std::isfinite(fc)) continue;
      const Eigen::VectorXd gc = gradient(x, y, cand, l2);
      const bool armijo = fc >= f + 1e-4 * t * slope;
      const bool flat = std::abs(fc - f) <= 1e-13 * std::max(1.0, std::abs(f)) &&
                        gc.lpNorm<Eigen::Infinity>() < r.gradient_norm;
      if (armijo || flat) {
        r.params = std::move(cand);
        f = fc;
        g = gc;
        accepted = true;
        break;
      }
    }
    if (!accepted) return r;
  }
}

}  // namespace agreelearn::logistic
