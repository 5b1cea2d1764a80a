#pragma once

#include <Eigen/Dense>

namespace coursegraph {

/// L2-regularized binary logistic regression, fit by deterministic
/// full-batch gradient descent. Features are standardized internally;
/// weights are reported in the original input space.
struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;

  double decision(const Eigen::VectorXd& x) const { return weights.dot(x) + bias; }
  double predict_proba(const Eigen::VectorXd& x) const;
};

struct LogisticFitOptions {
  double l2 = 1.0;  // inverse-strength C = 1/l2
  int iterations = 300;
  double learning_rate = 0.5;
  bool balanced = false;  // reweight classes to equal total mass
};

LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const LogisticFitOptions& opts = {});

}  // namespace coursegraph
