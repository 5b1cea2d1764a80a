#pragma once

#include <string>
#include <vector>

#include "coursegraph/types.hpp"

namespace coursegraph {

/// Flat irregular observation list over the 13 channels (10 actions +
/// Video ID, Problem ID, Problem SubmissionNum). Times are course-relative
/// days, non-decreasing.
struct EncodedSeries {
  std::string student_id;
  std::vector<double> times;   // days
  std::vector<int> channels;   // [0, 12]
  std::vector<double> values;  // finite
  int label = 0;

  size_t length() const { return times.size(); }
};

/// Early prediction level: percentage of the course duration visible to
/// the model.
struct EarlyLevel {
  double e = 100.0;

  double horizon_seconds(const CourseSchedule& schedule) const {
    return e / 100.0 * schedule.duration_seconds();
  }
};

/// Drops interactions after the level's horizon; label unchanged.
StudentTimeSeries truncate(const StudentTimeSeries& series, const CourseSchedule& schedule,
                           EarlyLevel level);

/// One observation per interaction on its action channel (value 1.0) plus
/// co-emitted metadata observations at the same timestamp. IDs are
/// normalized to (index+1)/n; submission numbers clamp at 10.
EncodedSeries encode(const StudentTimeSeries& series, const CourseSchedule& schedule);

struct FilterReport {
  int weeks = 2;
  double threshold = 0.99;
  int n_removed = 0;
  double precision_on_removed = 0.0;  // vs known labels; NaN-free (0 when empty)
  double heldout_precision = 0.0;     // cross-validated estimate behind the cutoff
  std::string warning;

  std::string to_json() const;
};

struct FilterResult {
  std::vector<StudentTimeSeries> kept;
  std::vector<StudentTimeSeries> removed;
  FilterReport report;
};

/// Removes students a 3-feature logistic model (IsAssignment count, IsQuiz
/// count, distinct graded problems touched, all within the first `weeks`
/// weeks) predicts as failing, with the probability cutoff calibrated on
/// held-out folds so that precision on the removed set >= accuracy_threshold.
FilterResult early_dropout_filter(const std::vector<StudentTimeSeries>& students,
                                  const CourseSchedule& schedule, int weeks,
                                  double accuracy_threshold);

/// Grid search over weeks in {1,2,3} and a threshold grid; returns the
/// operating point removing the most students while holding its precision
/// target, defaulting to weeks = 2, threshold = 0.99.
FilterResult select_filter_operating_point(
    const std::vector<StudentTimeSeries>& students, const CourseSchedule& schedule,
    const std::vector<double>& thresholds = {0.97, 0.98, 0.99});

}  // namespace coursegraph
