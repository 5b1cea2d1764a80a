#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coursegraph/graph_model.hpp"
#include "coursegraph/metrics.hpp"
#include "coursegraph/synthgen.hpp"

namespace coursegraph {

/// Hyperparameter overrides for one grid point, keyed by field name
/// (d_h, d_z, d_f, hidden, layers, heads).
using GridPoint = std::map<std::string, double>;

struct ExperimentConfig {
  std::optional<GeneratorConfig> synth;  // generate when set, else load paths
  std::filesystem::path events_path;
  std::filesystem::path schedule_path;
  std::filesystem::path labels_path;

  std::vector<double> levels = {40.0, 60.0};
  std::vector<std::string> models = {"graph", "bilstm", "transformer"};
  std::map<std::string, std::vector<GridPoint>> grids;  // empty -> defaults
  TrainConfig train;
  int tcav_runs = 100;
  int concept_min_size = 100;
  int random_cohort_size = 100;
  uint64_t seed = 1;
  std::string reference_model = "graph";
  bool deterministic = false;

  void validate() const;
  uint64_t config_hash() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
};

const std::map<std::string, std::vector<GridPoint>>& default_grids();

void save_results(const std::filesystem::path& path, const std::vector<CourseResult>& results);
std::vector<CourseResult> load_results(const std::filesystem::path& path);

struct ExperimentSummary {
  std::filesystem::path out_dir;
  std::vector<CourseResult> results;
};

/// Full pipeline: data, dropout filter, split, then per level truncation,
/// encoding, validation grid search per model, test predictions, concept
/// subsets, and the TCAV suite. Every artifact lands under out_dir with
/// the seed and the config hash. Errors carry the failing stage's name.
ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir);

struct LoadedData {
  CourseSchedule schedule;
  std::vector<StudentTimeSeries> students;
};

/// Generates the synthetic course or loads the configured data files.
LoadedData load_experiment_data(const ExperimentConfig& config);

/// Single-model path through the pipeline: data, filter, split, one
/// level's preprocessing, validation grid search, test predictions.
/// Artifacts land under out_dir in the run_experiment layout.
CourseResult train_and_evaluate(const ExperimentConfig& config,
                                const std::string& model_name, double level,
                                const std::filesystem::path& out_dir);

/// Reruns concept extraction and the TCAV suite for one level of an
/// artifact directory that already holds a trained graph checkpoint.
void run_tcav_for_level(const ExperimentConfig& config,
                        const std::filesystem::path& artifact_dir, double level);

/// Renders report tables and plots from a completed artifact directory:
/// the model x level BAC table with reference ratios and comparability
/// flags, global TCAV bar charts per class, two local-student charts, and
/// 2x2 confusion-matrix TCAV panels, each with a sibling data CSV.
void emit_report(const std::filesystem::path& artifact_dir);

}  // namespace coursegraph
