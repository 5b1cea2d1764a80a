#include "coursegraph/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "coursegraph/autodiff.hpp"
#include "coursegraph/metrics.hpp"
#include "json.hpp"

namespace coursegraph {

using ad::Mat;
using ad::Tape;
using ad::Var;

namespace {

Mat glorot(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (r + c)));
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

Prediction prediction_from_logits(const Eigen::Vector2d& logits) {
  const Eigen::VectorXd p = ad::softmax(logits);
  Prediction pred;
  pred.label = logits(1) > logits(0) ? 1 : 0;
  pred.probability = p(pred.label);
  pred.p_fail = p(1);
  return pred;
}

// Shared mini-batch loop: per-sample tapes, Adam, early stopping on
// validation BAC, best-checkpoint restore.
TrainingReport train_loop(
    std::vector<Mat*> params, const TrainConfig& tc, size_t n_train,
    const std::function<int(size_t)>& train_label,
    const std::function<Var(Tape&, const std::vector<Var>&, size_t)>& build_logits,
    const std::vector<int>& val_labels, const std::function<int(size_t)>& val_predict) {
  if (n_train == 0) throw Error("train: empty training set");
  long n_fail = 0;
  for (size_t i = 0; i < n_train; ++i) n_fail += train_label(i);
  if (n_fail == 0 || n_fail == static_cast<long>(n_train))
    throw Error("train: training set contains a single class");
  const double n = static_cast<double>(n_train);
  const double w_fail = n / (2.0 * n_fail);
  const double w_pass = n / (2.0 * (n - n_fail));

  TrainingReport report;
  for (const auto* p : params) report.param_count += p->size();
  ad::Adam adam(params, tc.learning_rate);

  std::vector<Mat> best;
  double best_bac = -1.0;
  int since_best = 0;
  std::vector<size_t> order(n_train);
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    std::mt19937_64 rng(tc.seed + static_cast<uint64_t>(epoch) * 0x9e3779b9ull);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (size_t b = 0; b < order.size(); b += tc.batch_size) {
      const size_t b_end = std::min(order.size(), b + tc.batch_size);
      const double inv = 1.0 / static_cast<double>(b_end - b);
      std::vector<Mat> grads;
      for (auto* p : params) grads.push_back(Mat::Zero(p->rows(), p->cols()));
      for (size_t k = b; k < b_end; ++k) {
        Tape tape;
        std::vector<Var> leaves;
        leaves.reserve(params.size());
        for (auto* p : params) leaves.push_back(tape.leaf(*p));
        Var logits = build_logits(tape, leaves, order[k]);
        const int y = train_label(order[k]);
        Var loss =
            ad::scale(ad::weighted_cross_entropy(logits, y, y == 1 ? w_fail : w_pass), inv);
        tape.backward(loss);
        epoch_loss += loss.value()(0, 0) * (b_end - b);
        for (size_t pi = 0; pi < leaves.size(); ++pi) grads[pi] += leaves[pi].grad();
      }
      if (!std::isfinite(epoch_loss)) {
        report.diverged = true;
        break;
      }
      adam.step(grads);
    }
    if (report.diverged) break;
    report.train_loss.push_back(epoch_loss / static_cast<double>(n_train));
    ++report.epochs_run;

    std::vector<int> preds(val_labels.size());
    for (size_t i = 0; i < val_labels.size(); ++i) preds[i] = val_predict(i);
    const double bac = balanced_accuracy(preds, val_labels);
    report.val_bac.push_back(bac);

    if (bac > best_bac) {
      best_bac = bac;
      report.best_epoch = epoch;
      report.best_val_bac = bac;
      best.clear();
      for (auto* p : params) best.push_back(*p);
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  if (!best.empty())
    for (size_t i = 0; i < params.size(); ++i) *params[i] = best[i];
  return report;
}

nlohmann::json mat_to_json(const Mat& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Mat mat_from_json(const nlohmann::json& j) {
  Mat m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != m.size())
    throw Error("checkpoint: matrix payload size mismatch");
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace

// ---- BiLSTM -------------------------------------------------------------

struct BiLstmDetail {
  // Leaf order must match BiLstmModel::parameters().
  static Var build(Tape& tape, const std::vector<Var>& L, const BiLstmModel& m,
                   const Eigen::MatrixXd& features) {
    const int d = m.config_.hidden;
    Mat X = (features.rowwise() - m.feat_mean_).array().rowwise() / m.feat_std_.array();
    const auto W = X.rows();

    auto run_direction = [&](int base, bool reverse) {
      Var h = tape.leaf(Mat::Zero(1, d));
      Var c = tape.leaf(Mat::Zero(1, d));
      for (Eigen::Index step = 0; step < W; ++step) {
        const Eigen::Index t = reverse ? W - 1 - step : step;
        Var gates = ad::add(
            ad::add(ad::lmul_const(X.row(t), L[base]), ad::matmul(h, L[base + 1])),
            L[base + 2]);
        Var i = ad::sigmoid(ad::slice_cols(gates, 0, d));
        Var f = ad::sigmoid(ad::slice_cols(gates, d, d));
        Var o = ad::sigmoid(ad::slice_cols(gates, 2 * d, d));
        Var g = ad::tanh(ad::slice_cols(gates, 3 * d, d));
        c = ad::add(ad::hadamard(f, c), ad::hadamard(i, g));
        h = ad::hadamard(o, ad::tanh(c));
      }
      return h;
    };

    Var u = ad::concat_cols({run_direction(0, false), run_direction(3, true)});
    Var hidden = ad::tanh(ad::add_rowvec(ad::matmul(u, L[6]), L[7]));
    return ad::add_rowvec(ad::matmul(hidden, L[8]), L[9]);
  }
};

BiLstmModel::BiLstmModel(const BaselineConfig& config, int n_features)
    : config_(config), n_features_(n_features) {
  std::mt19937_64 rng(config.seed);
  const int d = config.hidden;
  feat_mean_ = Eigen::RowVectorXd::Zero(n_features);
  feat_std_ = Eigen::RowVectorXd::Ones(n_features);
  Wx_fw_ = glorot(rng, n_features, 4 * d);
  Wh_fw_ = glorot(rng, d, 4 * d);
  b_fw_ = Mat::Zero(1, 4 * d);
  Wx_bw_ = glorot(rng, n_features, 4 * d);
  Wh_bw_ = glorot(rng, d, 4 * d);
  b_bw_ = Mat::Zero(1, 4 * d);
  W1_ = glorot(rng, 2 * d, config.d_f);
  b1_ = Mat::Zero(1, config.d_f);
  W2_ = glorot(rng, config.d_f, 2);
  b2_ = Mat::Zero(1, 2);
}

std::vector<Eigen::MatrixXd*> BiLstmModel::parameters() {
  return {&Wx_fw_, &Wh_fw_, &b_fw_, &Wx_bw_, &Wh_bw_, &b_bw_, &W1_, &b1_, &W2_, &b2_};
}

TrainingReport BiLstmModel::train(const std::vector<FeatureSample>& train_set,
                                  const std::vector<FeatureSample>& val_set,
                                  const TrainConfig& tc) {
  for (const auto& s : train_set)
    if (s.features.rows() != train_set.front().features.rows())
      throw Error("train_bilstm: feature matrices must share week count");

  // Standardization statistics from the training set only.
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(n_features_);
  long rows = 0;
  for (const auto& s : train_set) {
    mean += s.features.colwise().sum();
    rows += s.features.rows();
  }
  mean /= std::max<long>(rows, 1);
  Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(n_features_);
  for (const auto& s : train_set)
    var += (s.features.rowwise() - mean).array().square().colwise().sum().matrix();
  var /= std::max<long>(rows, 1);
  feat_mean_ = mean;
  feat_std_ = (var.array().sqrt() + 1e-8).matrix();

  std::vector<int> val_labels;
  for (const auto& v : val_set) val_labels.push_back(v.label);
  return train_loop(
      parameters(), tc, train_set.size(),
      [&](size_t i) { return train_set[i].label; },
      [&](Tape& tape, const std::vector<Var>& L, size_t i) {
        return BiLstmDetail::build(tape, L, *this, train_set[i].features);
      },
      val_labels, [&](size_t i) { return predict(val_set[i].features).label; });
}

Prediction BiLstmModel::predict(const Eigen::MatrixXd& features) const {
  Tape tape;
  std::vector<Var> leaves;
  for (auto* p : const_cast<BiLstmModel*>(this)->parameters()) leaves.push_back(tape.leaf(*p));
  Var logits = BiLstmDetail::build(tape, leaves, *this, features);
  return prediction_from_logits(logits.value().row(0).transpose());
}

void BiLstmModel::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "bilstm_features";
  j["config"] = {{"hidden", config_.hidden}, {"d_f", config_.d_f}, {"seed", config_.seed}};
  j["n_features"] = n_features_;
  j["feat_mean"] = std::vector<double>(feat_mean_.data(), feat_mean_.data() + feat_mean_.size());
  j["feat_std"] = std::vector<double>(feat_std_.data(), feat_std_.data() + feat_std_.size());
  auto& self = const_cast<BiLstmModel&>(*this);
  int i = 0;
  for (auto* p : self.parameters()) j["params"][std::to_string(i++)] = mat_to_json(*p);
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out << j.dump() << "\n";
}

BiLstmModel BiLstmModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  nlohmann::json j;
  in >> j;
  BaselineConfig cfg;
  cfg.kind = BaselineKind::BiLstmFeatures;
  cfg.hidden = j.at("config").at("hidden").get<int>();
  cfg.d_f = j.at("config").at("d_f").get<int>();
  cfg.seed = j.at("config").at("seed").get<uint64_t>();
  BiLstmModel m(cfg, j.at("n_features").get<int>());
  const auto mean = j.at("feat_mean").get<std::vector<double>>();
  const auto stdv = j.at("feat_std").get<std::vector<double>>();
  m.feat_mean_ = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), mean.size());
  m.feat_std_ = Eigen::Map<const Eigen::RowVectorXd>(stdv.data(), stdv.size());
  int i = 0;
  for (auto* p : m.parameters()) *p = mat_from_json(j.at("params").at(std::to_string(i++)));
  return m;
}

// ---- Transformer --------------------------------------------------------

struct TransformerDetail {
  struct Constants {
    Mat S1, Sv, PE;  // T x 13, T x 13, T x d_t
  };

  static Constants tokenize(const TransformerModel& m, const EncodedSeries& enc) {
    const auto cfg = m.config_;
    const size_t n = enc.length();
    const size_t start =
        n > static_cast<size_t>(cfg.max_tokens) ? n - static_cast<size_t>(cfg.max_tokens) : 0;
    const auto T = static_cast<Eigen::Index>(n - start);
    Constants c;
    c.S1 = Mat::Zero(T, kNumChannels);
    c.Sv = Mat::Zero(T, kNumChannels);
    c.PE = Mat::Zero(T, cfg.d_t);
    for (Eigen::Index j = 0; j < T; ++j) {
      const size_t i = start + static_cast<size_t>(j);
      c.S1(j, enc.channels[i]) = 1.0;
      c.Sv(j, enc.channels[i]) = enc.values[i];
      c.PE.row(j) = time_encoding(enc.times[i], cfg.d_t).transpose();
    }
    return c;
  }

  // Leaf order must match TransformerModel::parameters().
  static Var build(Tape& tape, const std::vector<Var>& L, const TransformerModel& m,
                   const EncodedSeries& enc) {
    const auto& cfg = m.config_;
    const auto c = tokenize(m, enc);
    if (c.S1.rows() == 0) {
      // No tokens: the head sees a zero embedding.
      Var u = tape.leaf(Mat::Zero(1, cfg.hidden));
      const size_t base = L.size() - 4;
      Var hidden = ad::tanh(ad::add_rowvec(ad::matmul(u, L[base]), L[base + 1]));
      return ad::add_rowvec(ad::matmul(hidden, L[base + 2]), L[base + 3]);
    }
    size_t li = 0;
    Var X = ad::add(ad::add(ad::lmul_const(c.S1, L[li]), ad::lmul_const(c.Sv, L[li + 1])),
                    ad::lmul_const(c.PE, L[li + 2]));
    li += 3;
    const int d_k = std::max(1, cfg.hidden / cfg.heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_k));
    for (int layer = 0; layer < cfg.layers; ++layer) {
      std::vector<Var> head_outs;
      for (int h = 0; h < cfg.heads; ++h) {
        Var Q = ad::matmul(X, L[li]);
        Var K = ad::matmul(X, L[li + 1]);
        Var V = ad::matmul(X, L[li + 2]);
        li += 3;
        Var A = ad::softmax_rows(ad::scale(ad::matmul(Q, ad::transpose(K)), scale));
        head_outs.push_back(ad::matmul(A, V));
      }
      Var O = ad::matmul(cfg.heads == 1 ? head_outs[0] : ad::concat_cols(head_outs), L[li]);
      ++li;
      X = ad::add(X, O);
      Var F = ad::add_rowvec(
          ad::matmul(ad::tanh(ad::add_rowvec(ad::matmul(X, L[li]), L[li + 1])), L[li + 2]),
          L[li + 3]);
      li += 4;
      X = ad::add(X, F);
    }
    const Mat pool = Mat::Constant(1, c.S1.rows(), 1.0 / static_cast<double>(c.S1.rows()));
    Var u = ad::lmul_const(pool, X);
    Var hidden = ad::tanh(ad::add_rowvec(ad::matmul(u, L[li]), L[li + 1]));
    return ad::add_rowvec(ad::matmul(hidden, L[li + 2]), L[li + 3]);
  }
};

TransformerModel::TransformerModel(const BaselineConfig& config) : config_(config) {
  std::mt19937_64 rng(config.seed);
  const int d_m = config.hidden;
  const int d_k = std::max(1, d_m / config.heads);
  E_ch_ = glorot(rng, kNumChannels, d_m);
  U_val_ = glorot(rng, kNumChannels, d_m);
  W_time_ = glorot(rng, config.d_t, d_m);
  for (int l = 0; l < config.layers; ++l) {
    Layer layer;
    for (int h = 0; h < config.heads; ++h) {
      layer.Wq.push_back(glorot(rng, d_m, d_k));
      layer.Wk.push_back(glorot(rng, d_m, d_k));
      layer.Wv.push_back(glorot(rng, d_m, d_k));
    }
    layer.Wo = glorot(rng, config.heads * d_k, d_m);
    layer.F1 = glorot(rng, d_m, 2 * d_m);
    layer.f1b = Mat::Zero(1, 2 * d_m);
    layer.F2 = glorot(rng, 2 * d_m, d_m);
    layer.f2b = Mat::Zero(1, d_m);
    layers_.push_back(std::move(layer));
  }
  W1_ = glorot(rng, d_m, config.d_f);
  b1_ = Mat::Zero(1, config.d_f);
  W2_ = glorot(rng, config.d_f, 2);
  b2_ = Mat::Zero(1, 2);
}

std::vector<Eigen::MatrixXd*> TransformerModel::parameters() {
  std::vector<Eigen::MatrixXd*> out{&E_ch_, &U_val_, &W_time_};
  for (auto& layer : layers_) {
    for (int h = 0; h < config_.heads; ++h) {
      out.push_back(&layer.Wq[h]);
      out.push_back(&layer.Wk[h]);
      out.push_back(&layer.Wv[h]);
    }
    out.push_back(&layer.Wo);
    out.push_back(&layer.F1);
    out.push_back(&layer.f1b);
    out.push_back(&layer.F2);
    out.push_back(&layer.f2b);
  }
  out.push_back(&W1_);
  out.push_back(&b1_);
  out.push_back(&W2_);
  out.push_back(&b2_);
  return out;
}

TrainingReport TransformerModel::train(const std::vector<EncodedSeries>& train_set,
                                       const std::vector<EncodedSeries>& val_set,
                                       const TrainConfig& tc) {
  std::vector<int> val_labels;
  for (const auto& v : val_set) val_labels.push_back(v.label);
  return train_loop(
      parameters(), tc, train_set.size(), [&](size_t i) { return train_set[i].label; },
      [&](Tape& tape, const std::vector<Var>& L, size_t i) {
        return TransformerDetail::build(tape, L, *this, train_set[i]);
      },
      val_labels, [&](size_t i) { return predict(val_set[i]).label; });
}

Prediction TransformerModel::predict(const EncodedSeries& encoded) const {
  Tape tape;
  std::vector<Var> leaves;
  for (auto* p : const_cast<TransformerModel*>(this)->parameters())
    leaves.push_back(tape.leaf(*p));
  Var logits = TransformerDetail::build(tape, leaves, *this, encoded);
  return prediction_from_logits(logits.value().row(0).transpose());
}

void TransformerModel::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = "transformer_raw";
  j["config"] = {{"hidden", config_.hidden}, {"layers", config_.layers},
                 {"heads", config_.heads},   {"d_f", config_.d_f},
                 {"d_t", config_.d_t},       {"max_tokens", config_.max_tokens},
                 {"seed", config_.seed}};
  auto& self = const_cast<TransformerModel&>(*this);
  int i = 0;
  for (auto* p : self.parameters()) j["params"][std::to_string(i++)] = mat_to_json(*p);
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out << j.dump() << "\n";
}

TransformerModel TransformerModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  nlohmann::json j;
  in >> j;
  BaselineConfig cfg;
  cfg.kind = BaselineKind::TransformerRaw;
  const auto& jc = j.at("config");
  cfg.hidden = jc.at("hidden").get<int>();
  cfg.layers = jc.at("layers").get<int>();
  cfg.heads = jc.at("heads").get<int>();
  cfg.d_f = jc.at("d_f").get<int>();
  cfg.d_t = jc.at("d_t").get<int>();
  cfg.max_tokens = jc.at("max_tokens").get<int>();
  cfg.seed = jc.at("seed").get<uint64_t>();
  TransformerModel m(cfg);
  int i = 0;
  for (auto* p : m.parameters()) *p = mat_from_json(j.at("params").at(std::to_string(i++)));
  return m;
}

}  // namespace coursegraph
