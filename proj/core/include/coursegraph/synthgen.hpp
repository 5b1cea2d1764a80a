#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "coursegraph/types.hpp"

namespace coursegraph {

/// Ground-truth behavioral intensities of one simulated learner.
/// consistency holds mixture weights over {uniform, first-half, second-half}
/// weekly activity envelopes and sums to 1.
struct LearnerProfile {
  double effort = 0.5;
  std::array<double, 3> consistency = {1.0, 0.0, 0.0};
  double regularity = 0.5;
  double proactivity = 0.5;
  double control = 0.5;
  double assessment = 0.5;
  double noise_level = 0.1;
  bool early_dropout = false;

  /// The six intensities entering the label model, in dimension order
  /// (effort, consistency-uniformness, regularity, proactivity, control,
  /// assessment).
  std::array<double, 6> as_vector() const {
    return {effort, consistency[0], regularity, proactivity, control, assessment};
  }
};

/// Optional per-dimension clamps: when set, every non-dropout student gets
/// that intensity instead of a random draw. Used to build causal cohorts.
struct ProfileOverrides {
  std::optional<double> effort;
  std::optional<std::array<double, 3>> consistency;
  std::optional<double> regularity;
  std::optional<double> proactivity;
  std::optional<double> control;
  std::optional<double> assessment;
};

struct GeneratorConfig {
  int n_students = 1000;
  int n_weeks = 10;
  int n_videos = 30;
  int n_problems = 20;
  /// Logistic coefficients mapping profile vector -> fail probability.
  std::array<double, 6> label_weights = {0, 0, 0, 0, 0, 0};
  double label_bias = 0.0;
  double early_dropout_fraction = 0.0;
  uint64_t seed = 0;
  ProfileOverrides overrides;

  void validate() const;
};

struct GeneratedCourse {
  CourseSchedule schedule;
  std::vector<StudentTimeSeries> students;  // labels attached
  std::vector<LearnerProfile> profiles;     // aligned with students
};

CourseSchedule make_schedule(const GeneratorConfig& config);

/// Pure function of (config, schedule, profile, student rng stream):
/// events realize the profile's intensities.
std::vector<Interaction> generate_student_stream(const GeneratorConfig& config,
                                                 const CourseSchedule& schedule,
                                                 const LearnerProfile& profile,
                                                 std::mt19937_64& rng);

/// Fully seeded course generation; same config twice gives identical output.
GeneratedCourse generate_course(const GeneratorConfig& config);

/// Ground-truth profiles CSV (test-only artifact, never consumed by models).
void save_profiles(const std::filesystem::path& path, const GeneratedCourse& course);

}  // namespace coursegraph
