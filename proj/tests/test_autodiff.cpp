#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"

#include "coursegraph/autodiff.hpp"

using namespace coursegraph;
using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

// Central finite differences of a scalar function of n matrix leaves,
// compared against one reverse-mode pass.
void check_gradients(const std::vector<Mat>& leaves,
                     const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                     double eps = 1e-6, double tol = 1e-5) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& m : leaves) vars.push_back(tape.leaf(m));
  Var root = build(tape, vars);
  REQUIRE(root.value().size() == 1);
  tape.backward(root);

  for (size_t k = 0; k < leaves.size(); ++k) {
    const Mat analytic = vars[k].grad();
    REQUIRE(analytic.rows() == leaves[k].rows());
    REQUIRE(analytic.cols() == leaves[k].cols());
    for (Eigen::Index i = 0; i < leaves[k].rows(); ++i) {
      for (Eigen::Index j = 0; j < leaves[k].cols(); ++j) {
        auto eval = [&](double delta) {
          std::vector<Mat> shifted = leaves;
          shifted[k](i, j) += delta;
          Tape t2;
          std::vector<Var> v2;
          for (const auto& m : shifted) v2.push_back(t2.leaf(m));
          return build(t2, v2).value()(0, 0);
        };
        const double fd = (eval(eps) - eval(-eps)) / (2.0 * eps);
        const double denom = std::max({1.0, std::abs(fd), std::abs(analytic(i, j))});
        CHECK(std::abs(analytic(i, j) - fd) / denom < tol);
      }
    }
  }
}

}  // namespace

TEST_CASE("elementwise and matmul ops match finite differences") {
  std::mt19937_64 rng(1);
  const Mat a = random_mat(3, 4, rng), b = random_mat(3, 4, rng);
  const Mat w = random_mat(4, 2, rng);

  check_gradients({a, b, w}, [](Tape&, const std::vector<Var>& v) {
    Var h = ad::hadamard(ad::add(v[0], v[1]), ad::sub(v[0], ad::scale(v[1], 0.5)));
    return ad::sum(ad::matmul(h, v[2]));
  });
}

TEST_CASE("activations match finite differences") {
  std::mt19937_64 rng(2);
  const Mat a = random_mat(2, 5, rng);
  check_gradients({a}, [](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::tanh(v[0]));
  });
  check_gradients({a}, [](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::sigmoid(v[0]));
  });
  check_gradients({a}, [](Tape&, const std::vector<Var>& v) {
    return ad::mean(ad::relu(ad::add_const(v[0], Mat::Constant(2, 5, 0.3))));
  });
}

TEST_CASE("broadcast, scaling and slicing ops match finite differences") {
  std::mt19937_64 rng(3);
  const Mat m = random_mat(4, 3, rng);
  const Mat r = random_mat(1, 3, rng);
  const Mat c = random_mat(4, 1, rng);

  check_gradients({m, r}, [](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::add_rowvec(v[0], v[1]));
  });
  check_gradients({m, c}, [](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::rowscale(v[0], v[1]));
  });
  Eigen::VectorXd cv(4);
  cv << 0.5, -1.0, 2.0, 0.25;
  check_gradients({m}, [cv](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::rowscale_const(v[0], cv));
  });
  check_gradients({m}, [](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::slice_cols(v[0], 1, 2));
  });
  check_gradients({m}, [](Tape&, const std::vector<Var>& v) {
    Mat aug = Mat::Constant(4, 2, 0.7);
    return ad::sum(ad::hadamard(ad::augment_cols_const(v[0], aug),
                                ad::augment_cols_const(v[0], aug)));
  });
  check_gradients({m}, [](Tape&, const std::vector<Var>& v) {
    Mat lc = Mat::Constant(2, 4, 0.5);
    Mat rc = Mat::Constant(3, 2, -0.25);
    return ad::sum(ad::rmul_const(ad::lmul_const(lc, v[0]), rc));
  });
  check_gradients({m}, [](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::transpose(v[0]));
  });
}

TEST_CASE("softmax ops match finite differences") {
  std::mt19937_64 rng(4);
  const Mat col = random_mat(5, 1, rng, 2.0);
  const Mat rows = random_mat(3, 4, rng, 2.0);
  const Mat mix = random_mat(5, 1, rng);

  check_gradients({col, mix}, [](Tape&, const std::vector<Var>& v) {
    return ad::sum(ad::hadamard(ad::softmax_col(v[0]), v[1]));
  });
  check_gradients({rows}, [](Tape&, const std::vector<Var>& v) {
    Var s = ad::softmax_rows(v[0]);
    return ad::sum(ad::hadamard(s, s));
  });
}

TEST_CASE("concat_cols routes gradients to each part") {
  std::mt19937_64 rng(5);
  const Mat a = random_mat(1, 2, rng), b = random_mat(1, 3, rng), c = random_mat(1, 1, rng);
  check_gradients({a, b, c}, [](Tape&, const std::vector<Var>& v) {
    Var cat = ad::concat_cols({v[0], v[1], v[2]});
    return ad::sum(ad::hadamard(cat, cat));
  });
}

TEST_CASE("weighted cross entropy matches finite differences and hand values") {
  std::mt19937_64 rng(6);
  const Mat logits = random_mat(1, 2, rng, 2.0);
  for (int target : {0, 1}) {
    for (double weight : {1.0, 2.5}) {
      check_gradients({logits}, [target, weight](Tape&, const std::vector<Var>& v) {
        return ad::weighted_cross_entropy(v[0], target, weight);
      });
    }
  }

  // Hand value: logits (0, 0) give loss w * log(2).
  Tape tape;
  Var v = tape.leaf(Mat::Zero(1, 2));
  Var loss = ad::weighted_cross_entropy(v, 1, 3.0);
  CHECK(loss.value()(0, 0) == doctest::Approx(3.0 * std::log(2.0)));
}

TEST_CASE("softmax helper is a stable probability vector") {
  Eigen::VectorXd logits(3);
  logits << 1000.0, 1001.0, 999.0;
  const Eigen::VectorXd p = ad::softmax(logits);
  CHECK(p.sum() == doctest::Approx(1.0));
  CHECK(p(1) > p(0));
  CHECK(p(0) > p(2));
  CHECK(std::isfinite(p(2)));
}

TEST_CASE("gradients accumulate when a leaf feeds two paths") {
  Tape tape;
  Var x = tape.leaf(Mat::Constant(1, 1, 3.0));
  Var y = ad::add(ad::scale(x, 2.0), ad::hadamard(x, x));  // 2x + x^2
  tape.backward(ad::sum(y));
  CHECK(x.grad()(0, 0) == doctest::Approx(2.0 + 2.0 * 3.0));
}

TEST_CASE("Adam minimizes a convex quadratic") {
  Mat w = Mat::Constant(2, 2, 5.0);
  ad::Adam opt({&w}, 0.1);
  const Mat target = (Mat(2, 2) << 1.0, -2.0, 0.5, 3.0).finished();
  for (int it = 0; it < 500; ++it) {
    opt.step({2.0 * (w - target)});
  }
  CHECK((w - target).cwiseAbs().maxCoeff() < 1e-3);
}
