#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coursegraph/graph_model.hpp"  // TrainConfig, TrainingReport, Prediction
#include "coursegraph/preprocess.hpp"

namespace coursegraph {

enum class BaselineKind { BiLstmFeatures, TransformerRaw };

struct BaselineConfig {
  BaselineKind kind = BaselineKind::BiLstmFeatures;
  int hidden = 32;       // recurrent hidden width / transformer model width
  int layers = 1;        // transformer encoder layers
  int heads = 1;
  int d_f = 32;          // classifier hidden width
  int d_t = 16;          // time encoding width (transformer)
  int max_tokens = 256;  // most recent observations kept (transformer)
  uint64_t seed = 0;
};

/// One weekly-feature sample for the recurrent baseline.
struct FeatureSample {
  std::string student_id;
  Eigen::MatrixXd features;  // weeks x 15, same week count within a run
  int label = 0;
};

/// Bidirectional LSTM over weekly engineered-feature rows with a dense
/// head. Features are standardized with training-set statistics.
class BiLstmModel {
 public:
  BiLstmModel(const BaselineConfig& config, int n_features);

  TrainingReport train(const std::vector<FeatureSample>& train_set,
                       const std::vector<FeatureSample>& val_set, const TrainConfig& tc);
  Prediction predict(const Eigen::MatrixXd& features) const;

  std::vector<Eigen::MatrixXd*> parameters();
  void save(const std::filesystem::path& path) const;
  static BiLstmModel load(const std::filesystem::path& path);

 private:
  friend struct BiLstmDetail;
  BaselineConfig config_;
  int n_features_;
  Eigen::RowVectorXd feat_mean_, feat_std_;
  // gates packed [i f o g]; separate directions
  Eigen::MatrixXd Wx_fw_, Wh_fw_, b_fw_;
  Eigen::MatrixXd Wx_bw_, Wh_bw_, b_bw_;
  Eigen::MatrixXd W1_, b1_, W2_, b2_;
};

/// Single-stack transformer encoder over raw observation tokens
/// (channel embedding + value projection + time encoding), mean-pooled
/// into a classification head.
class TransformerModel {
 public:
  explicit TransformerModel(const BaselineConfig& config);

  TrainingReport train(const std::vector<EncodedSeries>& train_set,
                       const std::vector<EncodedSeries>& val_set, const TrainConfig& tc);
  Prediction predict(const EncodedSeries& encoded) const;

  std::vector<Eigen::MatrixXd*> parameters();
  void save(const std::filesystem::path& path) const;
  static TransformerModel load(const std::filesystem::path& path);

 private:
  friend struct TransformerDetail;
  BaselineConfig config_;
  Eigen::MatrixXd E_ch_, U_val_;  // 13 x d_m channel / value embeddings
  Eigen::MatrixXd W_time_;        // d_t x d_m
  struct Layer {
    std::vector<Eigen::MatrixXd> Wq, Wk, Wv;  // per head, d_m x d_k
    Eigen::MatrixXd Wo;                       // heads*d_k x d_m
    Eigen::MatrixXd F1, f1b, F2, f2b;         // feed-forward
  };
  std::vector<Layer> layers_;
  Eigen::MatrixXd W1_, b1_, W2_, b2_;
};

}  // namespace coursegraph
