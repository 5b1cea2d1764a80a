#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coursegraph/concepts.hpp"
#include "coursegraph/graph_model.hpp"

namespace coursegraph {

/// Trace plus the class-logit gradients needed for directional
/// derivatives, indexed [layer][class].
struct TraceRecord {
  ActivationTrace trace;
  std::array<std::array<Eigen::VectorXd, 2>, kNumTraceLayers> grads;
};

using ActivationStore = std::map<std::string, TraceRecord>;

/// Runs every student through the model once and records activations and
/// both class gradients at both trace layers.
ActivationStore build_activation_store(const GraphModel& model,
                                       const std::vector<EncodedSeries>& students);

struct Cav {
  std::string concept_name;
  TraceLayer layer = TraceLayer::StudentEmbedding;
  int random_run = 0;
  Eigen::VectorXd direction;  // unit norm, oriented toward the concept
  double probe_accuracy = 0.0;
  bool weak = false;  // held-out probe accuracy below 0.55
};

/// Linear probe between concept-member and random-member activations at
/// one layer. 20% of each class is held out for the accuracy estimate.
Cav fit_cav(const ConceptSubset& concept_set, const ConceptSubset& random,
            const ActivationStore& traces, TraceLayer layer, uint64_t seed,
            int min_size = 100);

/// D^{p,l}(s): gradient of the class-y logit at the CAV's layer dotted
/// with the CAV direction.
double directional_derivative(const TraceRecord& record, const Cav& cav, int y);

struct TcavResult {
  std::string concept_name;
  int cls = 0;
  double score = 0.5;  // mean of layer_scores
  std::vector<double> layer_scores;
  std::vector<double> random_scores;  // one layer-averaged score per run
  double p_value = 1.0;
  int n_students = 0;
  bool absent = false;  // empty cohort (confusion-matrix cells)
};

/// Two-sided Welch t-test p-value for a difference in means. Degenerate
/// samples (fewer than two values or zero variance in both) fall back to
/// 1 when the means agree and 0 when they differ.
double welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

/// Layer-averaged fraction of class-y students whose derivative along the
/// concept CAV is strictly positive, averaged over random runs, with the
/// random-vs-random score distribution and its t-test p-value attached.
TcavResult tcav_score(const std::string& concept_name, int y,
                      const std::set<std::string>& students, const ActivationStore& traces,
                      const std::vector<Cav>& concept_cavs,
                      const std::vector<Cav>& random_cavs);

/// Fraction of (layer, run) pairs with a positive derivative for one
/// student.
double local_tcav(const std::string& student, int y, const ActivationStore& traces,
                  const std::vector<Cav>& concept_cavs);

struct ConfusionMatrixTcav {
  TcavResult true_pass;   // predicted pass, was pass (y = 0)
  TcavResult false_pass;  // predicted pass, was fail (y = 0)
  TcavResult true_fail;   // predicted fail, was fail (y = 1)
  TcavResult false_fail;  // predicted fail, was pass (y = 1)
};

/// Splits students by (prediction, label) and scores each cell with y set
/// to the predicted class. Empty cells come back flagged absent.
ConfusionMatrixTcav confusion_matrix_tcav(const std::vector<std::string>& student_ids,
                                          const std::vector<int>& predictions,
                                          const std::vector<int>& labels,
                                          const std::string& concept_name,
                                          const ActivationStore& traces,
                                          const std::vector<Cav>& concept_cavs,
                                          const std::vector<Cav>& random_cavs);

void save_tcav_results(const std::filesystem::path& path,
                       const std::vector<TcavResult>& results);
std::vector<TcavResult> load_tcav_results(const std::filesystem::path& path);

}  // namespace coursegraph
