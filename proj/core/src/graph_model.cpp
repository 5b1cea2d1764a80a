#include "coursegraph/graph_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "coursegraph/autodiff.hpp"
#include "coursegraph/metrics.hpp"
#include "json.hpp"

namespace coursegraph {

using ad::Mat;
using ad::Tape;
using ad::Var;

DependencyGraph::DependencyGraph(double logit_init) {
  logits = Mat::Constant(kNumActionChannels, kNumActionChannels, logit_init);
  logits.diagonal().setZero();  // self-edges excluded
}

Eigen::MatrixXd DependencyGraph::weights() const {
  return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
}

const std::string& trace_layer_name(TraceLayer l) {
  static const std::string kNames[] = {"student_embedding", "classifier_hidden"};
  return kNames[static_cast<int>(l)];
}

TraceLayer parse_trace_layer(const std::string& name) {
  if (name == "student_embedding") return TraceLayer::StudentEmbedding;
  if (name == "classifier_hidden") return TraceLayer::ClassifierHidden;
  throw Error("unknown trace layer: '" + name + "'");
}

const Eigen::VectorXd& ActivationTrace::layer(TraceLayer l) const {
  return l == TraceLayer::StudentEmbedding ? student_embedding : classifier_hidden;
}

Eigen::VectorXd time_encoding(double t_days, int d_t) {
  Eigen::VectorXd pe(d_t);
  for (int i = 0; i < d_t / 2; ++i) {
    // Geometric period ladder from half a day up to course scale.
    const double period = 0.5 * std::pow(256.0, i / std::max(1.0, d_t / 2.0 - 1.0));
    const double w = 2.0 * M_PI / period;
    pe(2 * i) = std::sin(w * t_days);
    pe(2 * i + 1) = std::cos(w * t_days);
  }
  return pe;
}

namespace {

// Observations grouped per timestamp; rows sharing a timestamp form one
// event so the forward pass is set-wise at equal t.
struct EventBatch {
  Mat value_select;  // T_e x 13, summed observation values per channel
  Mat count_select;  // T_e x 13, observation counts per channel
  std::vector<std::vector<int>> observed_actions;  // per event, sorted unique
  Eigen::VectorXd times_days;

  Eigen::Index size() const { return times_days.size(); }
};

EventBatch group_events(const EncodedSeries& enc, int max_observations) {
  const size_t n = enc.length();
  const size_t start = n > static_cast<size_t>(max_observations)
                           ? n - static_cast<size_t>(max_observations)
                           : 0;
  std::vector<double> times;
  std::vector<std::array<double, kNumChannels>> values, counts;
  std::vector<std::vector<int>> observed;
  for (size_t i = start; i < n; ++i) {
    if (times.empty() || enc.times[i] != times.back()) {
      times.push_back(enc.times[i]);
      values.push_back({});
      counts.push_back({});
      observed.emplace_back();
    }
    const int c = enc.channels[i];
    values.back()[c] += enc.values[i];
    counts.back()[c] += 1.0;
    if (c < kNumActionChannels) {
      auto& obs = observed.back();
      if (std::find(obs.begin(), obs.end(), c) == obs.end()) obs.push_back(c);
    }
  }
  EventBatch batch;
  const auto T = static_cast<Eigen::Index>(times.size());
  batch.value_select = Mat::Zero(T, kNumChannels);
  batch.count_select = Mat::Zero(T, kNumChannels);
  batch.times_days = Eigen::VectorXd::Zero(T);
  for (Eigen::Index j = 0; j < T; ++j) {
    batch.times_days(j) = times[j];
    for (int c = 0; c < kNumChannels; ++c) {
      batch.value_select(j, c) = values[j][c];
      batch.count_select(j, c) = counts[j][c];
    }
    std::sort(observed[j].begin(), observed[j].end());
  }
  batch.observed_actions = std::move(observed);
  return batch;
}

struct Leaves {
  Var graph_logits, W_emb, B_emb, P, Wk, q, Wv, s_empty, W1, b1, W2, b2;

  std::vector<Var> list() const {
    return {graph_logits, W_emb, B_emb, P, Wk, q, Wv, s_empty, W1, b1, W2, b2};
  }
};

struct BuiltForward {
  Var logits;
  Var student_embedding;
  Var classifier_hidden;  // pre-activation
};

}  // namespace

/// Shares the forward construction between inference, training, and tests.
struct GraphModelDetail {
  static Leaves make_leaves(Tape& tape, const GraphModel& m) {
    return Leaves{tape.leaf(m.graph_.logits), tape.leaf(m.W_emb_), tape.leaf(m.B_emb_),
                  tape.leaf(m.P_),            tape.leaf(m.Wk_),    tape.leaf(m.q_),
                  tape.leaf(m.Wv_),           tape.leaf(m.s_empty_), tape.leaf(m.W1_),
                  tape.leaf(m.b1_),           tape.leaf(m.W2_),    tape.leaf(m.b2_)};
  }

  static BuiltForward build(Tape& tape, const Leaves& L, const GraphModelConfig& cfg,
                            const EventBatch& events,
                            const Eigen::Matrix<bool, 10, 10>* edge_mask) {
    Var s{};
    const Eigen::Index T = events.size();
    if (T == 0) {
      s = L.s_empty;
    } else {
      // Stage 1: one interaction embedding per event.
      Var H = ad::tanh(ad::add(ad::lmul_const(events.value_select, L.W_emb),
                               ad::lmul_const(events.count_select, L.B_emb)));
      // Stage 2: message content sent to unobserved channels.
      Var M = ad::tanh(ad::matmul(H, L.P));
      Var edge_w = ad::sigmoid(L.graph_logits);

      Mat PE(T, cfg.d_t);
      for (Eigen::Index j = 0; j < T; ++j)
        PE.row(j) = time_encoding(events.times_days(j), cfg.d_t).transpose();

      const double attn_scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_h));
      std::vector<Var> z_parts;
      for (int c = 0; c < kNumActionChannels; ++c) {
        Eigen::VectorXd direct = Eigen::VectorXd::Zero(T);
        Mat gate_select = Mat::Zero(T, kNumActionChannels);
        bool active = false;
        for (Eigen::Index j = 0; j < T; ++j) {
          const auto& obs = events.observed_actions[j];
          if (std::binary_search(obs.begin(), obs.end(), c)) {
            direct(j) = 1.0;
            active = true;
            continue;
          }
          int n_src = 0;
          for (int u : obs)
            if (u != c && (!edge_mask || (*edge_mask)(u, c))) ++n_src;
          if (n_src == 0) continue;
          for (int u : obs)
            if (u != c && (!edge_mask || (*edge_mask)(u, c)))
              gate_select(j, u) = 1.0 / n_src;
          active = true;
        }
        if (!active) {
          // Unreachable channel: zero-attention fallback.
          z_parts.push_back(tape.leaf(Mat::Zero(1, cfg.d_z)));
          continue;
        }
        Mat col_pick = Mat::Zero(kNumActionChannels, 1);
        col_pick(c, 0) = 1.0;
        Var gate = ad::lmul_const(gate_select, ad::rmul_const(edge_w, col_pick));
        Var X = ad::add(ad::rowscale_const(H, direct), ad::rowscale(M, gate));
        // Stage 3: temporal attention pooling with time encodings.
        Var Y = ad::augment_cols_const(X, PE);
        Var keys = ad::tanh(ad::matmul(Y, L.Wk));
        Var alpha = ad::softmax_col(ad::scale(ad::matmul(keys, L.q), attn_scale));
        z_parts.push_back(ad::matmul(ad::transpose(alpha), ad::matmul(Y, L.Wv)));
      }
      // Stage 4: student embedding.
      s = ad::concat_cols(z_parts);
    }
    // Stage 5: classifier.
    Var hidden_pre = ad::add_rowvec(ad::matmul(s, L.W1), L.b1);
    Var logits = ad::add_rowvec(ad::matmul(ad::tanh(hidden_pre), L.W2), L.b2);
    return BuiltForward{logits, s, hidden_pre};
  }
};

GraphModel::GraphModel(GraphModelConfig config)
    : config_(config), graph_(config.graph_logit_init) {
  std::mt19937_64 rng(config.seed);
  auto init = [&rng](Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / (r + c)));
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = dist(rng);
    return m;
  };
  const int d_in = config_.d_h + config_.d_t;
  W_emb_ = init(kNumChannels, config_.d_h);
  B_emb_ = Mat::Zero(kNumChannels, config_.d_h);
  P_ = init(config_.d_h, config_.d_h);
  Wk_ = init(d_in, config_.d_h);
  q_ = init(config_.d_h, 1);
  Wv_ = init(d_in, config_.d_z);
  s_empty_ = Mat::Zero(1, kNumActionChannels * config_.d_z);
  W1_ = init(kNumActionChannels * config_.d_z, config_.d_f);
  b1_ = Mat::Zero(1, config_.d_f);
  W2_ = init(config_.d_f, 2);
  b2_ = Mat::Zero(1, 2);
}

std::vector<Eigen::MatrixXd*> GraphModel::parameters() {
  return {&graph_.logits, &W_emb_, &B_emb_, &P_, &Wk_, &q_, &Wv_, &s_empty_,
          &W1_, &b1_, &W2_, &b2_};
}

std::vector<std::string> GraphModel::parameter_names() const {
  return {"graph_logits", "W_emb", "B_emb", "P", "Wk", "q", "Wv", "s_empty",
          "W1", "b1", "W2", "b2"};
}

long GraphModel::param_count() const {
  long n = 0;
  for (const auto* p : const_cast<GraphModel*>(this)->parameters()) n += p->size();
  return n;
}

ForwardResult GraphModel::forward(const EncodedSeries& encoded,
                                  const Eigen::Matrix<bool, 10, 10>* edge_mask) const {
  Tape tape;
  const auto leaves = GraphModelDetail::make_leaves(tape, *this);
  const auto events = group_events(encoded, config_.max_observations);
  const auto built = GraphModelDetail::build(tape, leaves, config_, events, edge_mask);
  ForwardResult result;
  result.logits = built.logits.value().row(0).transpose();
  result.trace.student_id = encoded.student_id;
  result.trace.student_embedding = built.student_embedding.value().row(0).transpose();
  result.trace.classifier_hidden = built.classifier_hidden.value().row(0).transpose();
  result.trace.logits = result.logits;
  return result;
}

Prediction GraphModel::predict(const EncodedSeries& encoded) const {
  const auto fw = forward(encoded);
  const Eigen::VectorXd p = ad::softmax(fw.logits);
  Prediction pred;
  pred.label = fw.logits(1) > fw.logits(0) ? 1 : 0;  // ties go to pass
  pred.probability = p(pred.label);
  pred.p_fail = p(1);
  return pred;
}

std::vector<Prediction> GraphModel::predict_batch(
    const std::vector<EncodedSeries>& batch) const {
  std::vector<Prediction> out;
  out.reserve(batch.size());
  for (const auto& enc : batch) out.push_back(predict(enc));
  return out;
}

Eigen::VectorXd GraphModel::grad_wrt_activation(const EncodedSeries& encoded, TraceLayer layer,
                                                int cls) const {
  if (cls != 0 && cls != 1) throw Error("grad_wrt_activation: class must be 0 or 1");
  const auto fw = forward(encoded);
  // logits = tanh(hidden_pre) W2 + b2, hidden_pre = s W1 + b1.
  const Eigen::VectorXd dtanh =
      (1.0 - fw.trace.classifier_hidden.array().tanh().square()).matrix();
  const Eigen::VectorXd g_hidden = W2_.col(cls).cwiseProduct(dtanh);
  if (layer == TraceLayer::ClassifierHidden) return g_hidden;
  return W1_ * g_hidden;
}

double GraphModel::loss(const std::vector<EncodedSeries>& set, double w_pass,
                        double w_fail) const {
  double total = 0.0;
  for (const auto& enc : set) {
    const auto fw = forward(enc);
    const Eigen::VectorXd p = ad::softmax(fw.logits);
    const double w = enc.label == 1 ? w_fail : w_pass;
    total += -w * std::log(std::max(p(enc.label), 1e-300));
  }
  return set.empty() ? 0.0 : total / set.size();
}

TrainingReport GraphModel::train(const std::vector<EncodedSeries>& train_set,
                                 const std::vector<EncodedSeries>& val_set,
                                 const TrainConfig& tc) {
  if (train_set.empty()) throw Error("train: empty training set");
  long n_fail = 0;
  for (const auto& s : train_set) n_fail += s.label;
  if (n_fail == 0 || n_fail == static_cast<long>(train_set.size()))
    throw Error("train: training set contains a single class");
  const double n = static_cast<double>(train_set.size());
  const double w_fail = n / (2.0 * n_fail);
  const double w_pass = n / (2.0 * (n - n_fail));

  std::vector<EventBatch> events;
  events.reserve(train_set.size());
  for (const auto& enc : train_set)
    events.push_back(group_events(enc, config_.max_observations));

  std::vector<int> val_labels;
  for (const auto& v : val_set) val_labels.push_back(v.label);

  TrainingReport report;
  report.param_count = param_count();
  auto params = parameters();
  ad::Adam adam(params, tc.learning_rate);

  std::vector<Mat> best;
  double best_bac = -1.0;
  int since_best = 0;

  std::vector<size_t> order(train_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < tc.max_epochs; ++epoch) {
    std::mt19937_64 rng(tc.seed + static_cast<uint64_t>(epoch) * 0x9e3779b9ull);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    long seen = 0;
    for (size_t b = 0; b < order.size(); b += tc.batch_size) {
      const size_t b_end = std::min(order.size(), b + tc.batch_size);
      const double inv = 1.0 / static_cast<double>(b_end - b);
      std::vector<Mat> grads;
      for (auto* p : params) grads.push_back(Mat::Zero(p->rows(), p->cols()));

      for (size_t k = b; k < b_end; ++k) {
        const auto& enc = train_set[order[k]];
        Tape tape;
        const auto leaves = GraphModelDetail::make_leaves(tape, *this);
        const auto built =
            GraphModelDetail::build(tape, leaves, config_, events[order[k]], nullptr);
        const double w = enc.label == 1 ? w_fail : w_pass;
        Var loss = ad::scale(ad::weighted_cross_entropy(built.logits, enc.label, w), inv);
        tape.backward(loss);
        epoch_loss += loss.value()(0, 0) * (b_end - b);
        const auto leaf_list = leaves.list();
        for (size_t pi = 0; pi < leaf_list.size(); ++pi) grads[pi] += leaf_list[pi].grad();
      }
      seen += static_cast<long>(b_end - b);
      if (!std::isfinite(epoch_loss)) {
        report.diverged = true;
        break;
      }
      adam.step(grads);
    }
    if (report.diverged) break;
    report.train_loss.push_back(epoch_loss / static_cast<double>(seen));
    ++report.epochs_run;

    // Validation balanced accuracy drives model selection.
    std::vector<int> preds;
    preds.reserve(val_set.size());
    for (const auto& v : val_set) preds.push_back(predict(v).label);
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

// ---- checkpoint ---------------------------------------------------------

namespace {

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data(m.data(), m.data() + m.size());
  j["data"] = std::move(data);
  return j;
}

Mat mat_from_json(const nlohmann::json& j) {
  Mat m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != m.size())
    throw Error("checkpoint: matrix payload size mismatch");
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

uint64_t vocabulary_hash() {
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (const auto& name : ActionVocabulary::names())
    for (char ch : name) {
      h ^= static_cast<unsigned char>(ch);
      h *= 1099511628211ull;
    }
  return h;
}

}  // namespace

std::string TrainingReport::to_json() const {
  nlohmann::json j{{"epochs_run", epochs_run},     {"best_epoch", best_epoch},
                   {"best_val_bac", best_val_bac}, {"train_loss", train_loss},
                   {"val_bac", val_bac},           {"diverged", diverged},
                   {"param_count", param_count}};
  return j.dump(2);
}

void GraphModel::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["vocabulary_hash"] = vocabulary_hash();
  j["config"] = {{"d_h", config_.d_h},   {"d_t", config_.d_t},
                 {"d_z", config_.d_z},   {"d_f", config_.d_f},
                 {"max_observations", config_.max_observations},
                 {"graph_logit_init", config_.graph_logit_init},
                 {"seed", config_.seed}};
  auto& self = const_cast<GraphModel&>(*this);
  const auto names = parameter_names();
  const auto params = self.parameters();
  for (size_t i = 0; i < params.size(); ++i) j["params"][names[i]] = mat_to_json(*params[i]);
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out << j.dump() << "\n";
}

GraphModel GraphModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint: " + path.string());
  nlohmann::json j;
  in >> j;
  if (j.at("format_version").get<int>() != 1)
    throw Error("checkpoint: unsupported format version");
  if (j.at("vocabulary_hash").get<uint64_t>() != vocabulary_hash())
    throw Error("checkpoint: action vocabulary mismatch");
  GraphModelConfig cfg;
  const auto& jc = j.at("config");
  cfg.d_h = jc.at("d_h").get<int>();
  cfg.d_t = jc.at("d_t").get<int>();
  cfg.d_z = jc.at("d_z").get<int>();
  cfg.d_f = jc.at("d_f").get<int>();
  cfg.max_observations = jc.at("max_observations").get<int>();
  cfg.graph_logit_init = jc.at("graph_logit_init").get<double>();
  cfg.seed = jc.at("seed").get<uint64_t>();
  GraphModel model(cfg);
  const auto names = model.parameter_names();
  auto params = model.parameters();
  for (size_t i = 0; i < params.size(); ++i)
    *params[i] = mat_from_json(j.at("params").at(names[i]));
  return model;
}

}  // namespace coursegraph
