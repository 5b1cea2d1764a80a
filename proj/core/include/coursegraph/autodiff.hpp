#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace coursegraph::ad {

using Mat = Eigen::MatrixXd;

class Tape;

/// Lightweight handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  const Mat& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Reverse-mode tape over dense matrices. Nodes are created in forward
/// order; backward() walks them in reverse. One tape per forward/backward
/// pass.
class Tape {
 public:
  /// Leaf node; grad is accumulated and readable after backward().
  Var leaf(Mat value);

  Var make(Mat value, std::function<void(Tape&)> backward);

  Mat& value(int id) { return nodes_[id].value; }
  Mat& grad(int id) { return nodes_[id].grad; }

  /// Seeds d(root)/d(root) = 1 (root must be 1x1) and propagates.
  void backward(Var root);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void(Tape&)> backward;
  };
  std::vector<Node> nodes_;
};

// ---- ops ----------------------------------------------------------------

Var add(Var a, Var b);               // same shape
Var sub(Var a, Var b);
Var add_rowvec(Var m, Var r);        // (T x d) + broadcast (1 x d)
Var matmul(Var a, Var b);
Var lmul_const(const Mat& c, Var a); // c * a, c constant
Var rmul_const(Var a, const Mat& c); // a * c, c constant
Var add_const(Var a, const Mat& c);
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
Var rowscale(Var m, Var c);          // scale row i of m (T x d) by c(i, 0)
Var rowscale_const(Var m, const Eigen::VectorXd& c);
Var augment_cols_const(Var a, const Mat& c);  // [a | c], c constant
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var transpose(Var a);
Var concat_cols(const std::vector<Var>& parts);  // all 1 x d_i -> 1 x sum d_i
Var softmax_col(Var a);              // column vector softmax
Var softmax_rows(Var a);             // softmax over each row
Var slice_cols(Var a, Eigen::Index start, Eigen::Index len);
Var sum(Var a);                      // 1 x 1
Var mean(Var a);                     // 1 x 1
/// Class-weighted cross-entropy of a single-row logit vector against an
/// integer target. Returns a 1 x 1 loss node.
Var weighted_cross_entropy(Var logits, int target, double weight);

/// Numerically-stable softmax of a row vector (plain Eigen helper).
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Adam optimizer state over a fixed list of parameter matrices.
class Adam {
 public:
  Adam(std::vector<Mat*> params, double learning_rate);
  /// grads aligned with the parameter list; applies one update step.
  void step(const std::vector<Mat>& grads);

 private:
  std::vector<Mat*> params_;
  std::vector<Mat> m_, v_;
  double lr_;
  int t_ = 0;
};

}  // namespace coursegraph::ad
