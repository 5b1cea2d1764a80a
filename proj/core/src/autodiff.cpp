#include "coursegraph/autodiff.hpp"

#include <cmath>

#include "coursegraph/types.hpp"

namespace coursegraph::ad {

const Mat& Var::value() const { return tape->value(id); }
const Mat& Var::grad() const { return tape->grad(id); }

Var Tape::leaf(Mat value) { return make(std::move(value), nullptr); }

Var Tape::make(Mat value, std::function<void(Tape&)> backward) {
  Node node;
  node.grad = Mat::Zero(value.rows(), value.cols());
  node.value = std::move(value);
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var root) {
  if (root.tape != this) throw Error("backward: node belongs to another tape");
  if (nodes_[root.id].value.size() != 1) throw Error("backward: root must be scalar");
  nodes_[root.id].grad(0, 0) = 1.0;
  for (int i = root.id; i >= 0; --i)
    if (nodes_[i].backward) nodes_[i].backward(*this);
}

namespace {
Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("autodiff: nodes belong to different tapes");
  return *a.tape;
}
}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.make(a.value() + b.value(), [a, b, out = t.size()](Tape& t) {
    t.grad(a.id) += t.grad(static_cast<int>(out));
    t.grad(b.id) += t.grad(static_cast<int>(out));
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.make(a.value() - b.value(), [a, b, out = t.size()](Tape& t) {
    t.grad(a.id) += t.grad(static_cast<int>(out));
    t.grad(b.id) -= t.grad(static_cast<int>(out));
  });
}

Var add_rowvec(Var m, Var r) {
  Tape& t = same_tape(m, r);
  Mat v = m.value().rowwise() + r.value().row(0);
  return t.make(std::move(v), [m, r, out = t.size()](Tape& t) {
    const Mat& g = t.grad(static_cast<int>(out));
    t.grad(m.id) += g;
    t.grad(r.id) += g.colwise().sum();
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.make(a.value() * b.value(), [a, b, out = t.size()](Tape& t) {
    const Mat& g = t.grad(static_cast<int>(out));
    t.grad(a.id) += g * t.value(b.id).transpose();
    t.grad(b.id) += t.value(a.id).transpose() * g;
  });
}

Var lmul_const(const Mat& c, Var a) {
  Tape& t = *a.tape;
  return t.make(c * a.value(), [a, c, out = t.size()](Tape& t) {
    t.grad(a.id) += c.transpose() * t.grad(static_cast<int>(out));
  });
}

Var rmul_const(Var a, const Mat& c) {
  Tape& t = *a.tape;
  return t.make(a.value() * c, [a, c, out = t.size()](Tape& t) {
    t.grad(a.id) += t.grad(static_cast<int>(out)) * c.transpose();
  });
}

Var add_const(Var a, const Mat& c) {
  Tape& t = *a.tape;
  return t.make(a.value() + c, [a, out = t.size()](Tape& t) {
    t.grad(a.id) += t.grad(static_cast<int>(out));
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  return t.make(a.value() * s, [a, s, out = t.size()](Tape& t) {
    t.grad(a.id) += s * t.grad(static_cast<int>(out));
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b);
  return t.make(a.value().cwiseProduct(b.value()), [a, b, out = t.size()](Tape& t) {
    const Mat& g = t.grad(static_cast<int>(out));
    t.grad(a.id) += g.cwiseProduct(t.value(b.id));
    t.grad(b.id) += g.cwiseProduct(t.value(a.id));
  });
}

Var rowscale(Var m, Var c) {
  Tape& t = same_tape(m, c);
  Mat v = m.value().array().colwise() * c.value().col(0).array();
  return t.make(std::move(v), [m, c, out = t.size()](Tape& t) {
    const Mat& g = t.grad(static_cast<int>(out));
    t.grad(m.id) += (g.array().colwise() * t.value(c.id).col(0).array()).matrix();
    t.grad(c.id).col(0) += g.cwiseProduct(t.value(m.id)).rowwise().sum();
  });
}

Var rowscale_const(Var m, const Eigen::VectorXd& c) {
  Tape& t = *m.tape;
  Mat v = m.value().array().colwise() * c.array();
  return t.make(std::move(v), [m, c, out = t.size()](Tape& t) {
    t.grad(m.id) +=
        (t.grad(static_cast<int>(out)).array().colwise() * c.array()).matrix();
  });
}

Var augment_cols_const(Var a, const Mat& c) {
  Tape& t = *a.tape;
  Mat v(a.rows(), a.cols() + c.cols());
  v << a.value(), c;
  return t.make(std::move(v), [a, out = t.size()](Tape& t) {
    const Mat& g = t.grad(static_cast<int>(out));
    t.grad(a.id) += g.leftCols(t.value(a.id).cols());
  });
}

Var tanh(Var a) {
  Tape& t = *a.tape;
  return t.make(a.value().array().tanh().matrix(), [a, out = t.size()](Tape& t) {
    const Mat& y = t.value(static_cast<int>(out));
    t.grad(a.id) +=
        t.grad(static_cast<int>(out)).cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

Var sigmoid(Var a) {
  Tape& t = *a.tape;
  Mat y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return t.make(std::move(y), [a, out = t.size()](Tape& t) {
    const Mat& y = t.value(static_cast<int>(out));
    t.grad(a.id) += t.grad(static_cast<int>(out))
                        .cwiseProduct((y.array() * (1.0 - y.array())).matrix());
  });
}

Var relu(Var a) {
  Tape& t = *a.tape;
  return t.make(a.value().cwiseMax(0.0), [a, out = t.size()](Tape& t) {
    const Mat mask = (t.value(a.id).array() > 0.0).cast<double>().matrix();
    t.grad(a.id) += t.grad(static_cast<int>(out)).cwiseProduct(mask);
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  return t.make(a.value().transpose(), [a, out = t.size()](Tape& t) {
    t.grad(a.id) += t.grad(static_cast<int>(out)).transpose();
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols: empty input");
  Tape& t = *parts.front().tape;
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw Error("concat_cols: mismatched row counts");
    total += p.cols();
  }
  Mat v(rows, total);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.block(0, off, rows, p.cols()) = p.value();
    off += p.cols();
  }
  return t.make(std::move(v), [parts, rows, out = t.size()](Tape& t) {
    const Mat& g = t.grad(static_cast<int>(out));
    Eigen::Index off = 0;
    for (const auto& p : parts) {
      t.grad(p.id) += g.block(0, off, rows, t.value(p.id).cols());
      off += t.value(p.id).cols();
    }
  });
}

Var softmax_col(Var a) {
  Tape& t = *a.tape;
  Eigen::VectorXd x = a.value().col(0);
  const double m = x.maxCoeff();
  Eigen::VectorXd y = (x.array() - m).exp();
  y /= y.sum();
  return t.make(Mat(y), [a, out = t.size()](Tape& t) {
    const Eigen::VectorXd y = t.value(static_cast<int>(out)).col(0);
    const Eigen::VectorXd g = t.grad(static_cast<int>(out)).col(0);
    const double dot = g.dot(y);
    t.grad(a.id).col(0) += (y.array() * (g.array() - dot)).matrix();
  });
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  Mat y = a.value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    Eigen::RowVectorXd r = (y.row(i).array() - y.row(i).maxCoeff()).exp();
    y.row(i) = r / r.sum();
  }
  return t.make(std::move(y), [a, out = t.size()](Tape& t) {
    const Mat& y = t.value(static_cast<int>(out));
    const Mat& g = t.grad(static_cast<int>(out));
    Mat& ga = t.grad(a.id);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = g.row(i).dot(y.row(i));
      ga.row(i) += (y.row(i).array() * (g.row(i).array() - dot)).matrix();
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index len) {
  Tape& t = *a.tape;
  return t.make(a.value().middleCols(start, len), [a, start, len, out = t.size()](Tape& t) {
    t.grad(a.id).middleCols(start, len) += t.grad(static_cast<int>(out));
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return t.make(std::move(v), [a, out = t.size()](Tape& t) {
    t.grad(a.id).array() += t.grad(static_cast<int>(out))(0, 0);
  });
}

Var mean(Var a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd y = (logits.array() - logits.maxCoeff()).exp();
  return y / y.sum();
}

Var weighted_cross_entropy(Var logits, int target, double weight) {
  Tape& t = *logits.tape;
  const Eigen::VectorXd p = softmax(logits.value().row(0).transpose());
  Mat v(1, 1);
  v(0, 0) = -weight * std::log(std::max(p(target), 1e-300));
  return t.make(std::move(v), [logits, p, target, weight, out = t.size()](Tape& t) {
    const double g = t.grad(static_cast<int>(out))(0, 0);
    Eigen::RowVectorXd d = weight * p.transpose();
    d(target) -= weight;
    t.grad(logits.id).row(0) += g * d;
  });
}

Adam::Adam(std::vector<Mat*> params, double learning_rate)
    : params_(std::move(params)), lr_(learning_rate) {
  for (Mat* p : params_) {
    m_.push_back(Mat::Zero(p->rows(), p->cols()));
    v_.push_back(Mat::Zero(p->rows(), p->cols()));
  }
}

void Adam::step(const std::vector<Mat>& grads) {
  if (grads.size() != params_.size()) throw Error("Adam::step: gradient list misaligned");
  ++t_;
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double c1 = 1.0 - std::pow(beta1, t_), c2 = 1.0 - std::pow(beta2, t_);
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i] = beta1 * m_[i] + (1 - beta1) * grads[i];
    v_[i] = (beta2 * v_[i].array() + (1 - beta2) * grads[i].array().square()).matrix();
    params_[i]->array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
}

}  // namespace coursegraph::ad
