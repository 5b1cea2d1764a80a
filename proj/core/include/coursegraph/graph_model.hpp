#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coursegraph/preprocess.hpp"

namespace coursegraph {

/// Learnable dependency graph over the 10 action channels. Edge weights
/// are sigmoid(logits), so they stay inside (0, 1); the +6 init puts them
/// at 1 up to sigmoid saturation. The diagonal is unused.
struct DependencyGraph {
  Eigen::MatrixXd logits;

  explicit DependencyGraph(double logit_init = 6.0);
  Eigen::MatrixXd weights() const;
};

struct GraphModelConfig {
  int d_h = 32;   // interaction embedding width
  int d_t = 16;   // sinusoidal time encoding width
  int d_z = 32;   // per-channel action embedding width
  int d_f = 64;   // classifier hidden width
  int max_observations = 2000;  // most recent rows kept
  double graph_logit_init = 6.0;
  uint64_t seed = 0;
};

struct TrainConfig {
  int batch_size = 64;
  double learning_rate = 1e-3;
  int max_epochs = 100;
  int patience = 10;
  uint64_t seed = 0;
};

struct TrainingReport {
  int epochs_run = 0;
  int best_epoch = -1;
  double best_val_bac = 0.0;
  std::vector<double> train_loss;
  std::vector<double> val_bac;
  bool diverged = false;
  long param_count = 0;

  std::string to_json() const;
};

enum class TraceLayer { StudentEmbedding, ClassifierHidden };
constexpr int kNumTraceLayers = 2;
const std::string& trace_layer_name(TraceLayer l);
TraceLayer parse_trace_layer(const std::string& name);

/// Fixed-size per-layer activations of one forward pass. classifier_hidden
/// is recorded pre-nonlinearity.
struct ActivationTrace {
  std::string student_id;
  Eigen::VectorXd student_embedding;  // 10 * d_z
  Eigen::VectorXd classifier_hidden;  // d_f
  Eigen::Vector2d logits;

  const Eigen::VectorXd& layer(TraceLayer l) const;
};

struct Prediction {
  int label = 0;        // ties break toward pass (0)
  double probability = 0.5;  // softmax mass of the predicted class
  double p_fail = 0.5;
};

struct ForwardResult {
  Eigen::Vector2d logits;
  ActivationTrace trace;
};

/// Sinusoidal encoding of a continuous day value, width d_t.
Eigen::VectorXd time_encoding(double t_days, int d_t);

/// The dependency-graph time series classifier: per-channel interaction
/// embeddings, message passing to unobserved channels, temporal attention
/// per channel, concatenated student embedding, dense pass/fail head.
class GraphModel {
 public:
  explicit GraphModel(GraphModelConfig config);

  const GraphModelConfig& config() const { return config_; }
  const DependencyGraph& graph() const { return graph_; }
  long param_count() const;

  /// Optional edge mask restricting message passing (tests and the
  /// per-student source mask); mask(u, v) == false drops edge u -> v.
  ForwardResult forward(const EncodedSeries& encoded,
                        const Eigen::Matrix<bool, 10, 10>* edge_mask = nullptr) const;

  Prediction predict(const EncodedSeries& encoded) const;
  std::vector<Prediction> predict_batch(const std::vector<EncodedSeries>& batch) const;

  /// d logits[cls] / d activation at the given trace layer, evaluated at
  /// this input. Same dimensionality as the recorded activation.
  Eigen::VectorXd grad_wrt_activation(const EncodedSeries& encoded, TraceLayer layer,
                                      int cls) const;

  /// Mini-batch training with class-weighted cross-entropy, early stopping
  /// on validation balanced accuracy. Restores the best checkpoint.
  TrainingReport train(const std::vector<EncodedSeries>& train_set,
                       const std::vector<EncodedSeries>& val_set, const TrainConfig& tc);

  void save(const std::filesystem::path& path) const;
  static GraphModel load(const std::filesystem::path& path);

  /// Parameter access for gradient checking.
  std::vector<Eigen::MatrixXd*> parameters();
  std::vector<std::string> parameter_names() const;
  /// Average weighted cross-entropy over a set (no update); used by tests.
  double loss(const std::vector<EncodedSeries>& set, double w_pass, double w_fail) const;

 private:
  friend struct GraphModelDetail;
  GraphModelConfig config_;
  DependencyGraph graph_;
  Eigen::MatrixXd W_emb_, B_emb_;  // 13 x d_h
  Eigen::MatrixXd P_;              // d_h x d_h message projection
  Eigen::MatrixXd Wk_, q_, Wv_;    // attention maps
  Eigen::MatrixXd s_empty_;        // 1 x 10*d_z learned empty-series embedding
  Eigen::MatrixXd W1_, b1_, W2_, b2_;
};

}  // namespace coursegraph
