#include "coursegraph/logistic.hpp"

#include <cmath>

#include "coursegraph/types.hpp"

namespace coursegraph {

double LogisticModel::predict_proba(const Eigen::VectorXd& x) const {
  return 1.0 / (1.0 + std::exp(-decision(x)));
}

LogisticModel fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const LogisticFitOptions& opts) {
  const auto n = X.rows();
  const auto d = X.cols();
  if (n == 0 || y.size() != n) throw Error("fit_logistic: empty or misaligned inputs");

  // Standardize; constant columns keep scale 1.
  Eigen::RowVectorXd mean = X.colwise().mean();
  Eigen::RowVectorXd std_dev =
      ((X.rowwise() - mean).array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < d; ++j)
    if (std_dev(j) < 1e-12) std_dev(j) = 1.0;
  Eigen::MatrixXd Z = (X.rowwise() - mean).array().rowwise() / std_dev.array();

  Eigen::VectorXd sample_w = Eigen::VectorXd::Ones(n);
  if (opts.balanced) {
    const double n1 = y.sum();
    const double n0 = static_cast<double>(n) - n1;
    if (n0 > 0 && n1 > 0)
      for (Eigen::Index i = 0; i < n; ++i)
        sample_w(i) = y(i) > 0.5 ? n / (2.0 * n1) : n / (2.0 * n0);
  }

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double b = 0.0;
  // Adam with fixed hyperparameters; full-batch so the fit is deterministic.
  Eigen::VectorXd mw = Eigen::VectorXd::Zero(d), vw = Eigen::VectorXd::Zero(d);
  double mb = 0.0, vb = 0.0;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  for (int it = 1; it <= opts.iterations; ++it) {
    Eigen::VectorXd p = (1.0 / (1.0 + (-(Z * w).array() - b).exp())).matrix();
    Eigen::VectorXd r = ((p - y).array() * sample_w.array()).matrix();
    Eigen::VectorXd gw = Z.transpose() * r / static_cast<double>(n) + opts.l2 / n * w;
    double gb = r.mean();

    mw = beta1 * mw + (1 - beta1) * gw;
    vw = beta2 * vw.array().matrix() + (1 - beta2) * gw.array().square().matrix();
    mb = beta1 * mb + (1 - beta1) * gb;
    vb = beta2 * vb + (1 - beta2) * gb * gb;
    const double c1 = 1.0 - std::pow(beta1, it), c2 = 1.0 - std::pow(beta2, it);
    w -= opts.learning_rate * ((mw / c1).array() / ((vw / c2).array().sqrt() + eps)).matrix();
    b -= opts.learning_rate * (mb / c1) / (std::sqrt(vb / c2) + eps);
  }

  LogisticModel model;
  model.weights = (w.array() / std_dev.transpose().array()).matrix();
  model.bias = b - model.weights.dot(mean.transpose());
  return model;
}

}  // namespace coursegraph
