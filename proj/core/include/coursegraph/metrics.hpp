#pragma once

#include <string>
#include <vector>

namespace coursegraph {

/// (TPR + TNR) / 2 with fail (1) as positive class. Throws when either
/// class is absent from the labels.
double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct CourseResult {
  std::string course_id;
  int iteration = 1;
  std::string model;
  double level = 100.0;
  double bac = 0.0;
  int n_students = 0;
  std::vector<std::string> student_ids;
  std::vector<int> predictions;
  std::vector<int> labels;
};

struct WeightedAverage {
  double bac = 0.0;
  int n_students = 0;
  int n_iterations = 0;
};

/// Student-weighted mean BAC over course iterations.
WeightedAverage weighted_course_average(const std::vector<CourseResult>& results);

/// Fraction of iterations where the reference model's BAC >= the baseline's,
/// matched by (course_id, iteration, level).
std::string reference_ratio(const std::vector<CourseResult>& reference,
                            const std::vector<CourseResult>& baseline);

enum class Comparability { Better, Comparable, Worse };
std::string comparability_name(Comparability c);

/// Better when bac_model >= bac_reference; comparable when the relative
/// decrease is under 5%; worse otherwise.
Comparability comparability_flag(double bac_model, double bac_reference);

}  // namespace coursegraph
