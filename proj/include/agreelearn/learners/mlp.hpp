#pragma once

// One-hidden-layer perceptron: logistic hidden units, logistic output, mean
// cross-entropy loss, full-batch gradient descent.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>

#include "agreelearn/learners/logistic.hpp"

namespace agreelearn::mlp {

struct Network {
  Eigen::MatrixXd hidden_weights;  // hidden x inputs
  Eigen::VectorXd hidden_bias;
  Eigen::VectorXd output_weights;  // hidden
  double output_bias = 0.0;

  static Network zeros(Eigen::Index inputs, Eigen::Index hidden) {
    return {Eigen::MatrixXd::Zero(hidden, inputs), Eigen::VectorXd::Zero(hidden), Eigen::VectorXd::Zero(hidden),
            0.0};
  }

  /// Weights and biases drawn from U[-0.5, 0.5].
  static Network random(Eigen::Index inputs, Eigen::Index hidden, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Network net = zeros(inputs, hidden);
    for (Eigen::Index h = 0; h < hidden; ++h) {
      for (Eigen::Index i = 0; i < inputs; ++i) net.hidden_weights(h, i) = u(rng);
      net.hidden_bias(h) = u(rng);
      net.output_weights(h) = u(rng);
    }
    net.output_bias = u(rng);
    return net;
  }
};

inline Eigen::VectorXd hidden_activations(const Network& net, const Eigen::VectorXd& x) {
  Eigen::VectorXd a = net.hidden_weights * x + net.hidden_bias;
  return a.unaryExpr([](double z) { return logistic::sigmoid(z); });
}

inline double forward(const Network& net, const Eigen::VectorXd& x) {
  return logistic::sigmoid(net.output_weights.dot(hidden_activations(net, x)) + net.output_bias);
}

namespace detail {

inline Eigen::MatrixXd hidden_layer(const Network& net, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a = x * net.hidden_weights.transpose();
  a.rowwise() += net.hidden_bias.transpose();
  return a.unaryExpr([](double z) { return logistic::sigmoid(z); });
}

}  // namespace detail

/// Mean cross-entropy over the rows of x; y in {0,1}.
inline double loss(const Network& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::VectorXd z = (detail::hidden_layer(net, x) * net.output_weights).array() + net.output_bias;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += logistic::softplus(z(i)) - y(i) * z(i);
  return total / static_cast<double>(x.rows());
}

/// Backpropagated gradient of `loss`, in Network layout.
inline Network gradient(const Network& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd h = detail::hidden_layer(net, x);
  const Eigen::VectorXd z = (h * net.output_weights).array() + net.output_bias;
  Eigen::VectorXd delta(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) delta(i) = (logistic::sigmoid(z(i)) - y(i)) / static_cast<double>(x.rows());
  const Eigen::MatrixXd delta_hidden =
      ((delta * net.output_weights.transpose()).array() * h.array() * (1.0 - h.array())).matrix();
  Network g;
  g.output_weights = h.transpose() * delta;
  g.output_bias = delta.sum();
  g.hidden_weights = delta_hidden.transpose() * x;
  g.hidden_bias = delta_hidden.colwise().sum().transpose();
  return g;
}

inline Network train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Eigen::Index hidden, double learning_rate,
                     int epochs, std::uint64_t seed) {
  Network net = Network::random(x.cols(), hidden, seed);
  for (int e = 0; e < epochs; ++e) {
    const Network g = gradient(net, x, y);
    net.hidden_weights -= learning_rate * g.hidden_weights;
    net.hidden_bias -= learning_rate * g.hidden_bias;
    net.output_weights -= learning_rate * g.output_weights;
    net.output_bias -= learning_rate * g.output_bias;
  }
  return net;
}

}  // namespace agreelearn::mlp
