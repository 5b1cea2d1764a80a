#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coursegraph/preprocess.hpp"
#include "coursegraph/types.hpp"

namespace coursegraph {

/// Indices into MeasureVector::values, grouped by learning dimension.
enum Measure : int {
  kTotalTimeOnline = 0,       // effort (hours)
  kTotalVideoClicks = 1,      // effort (count)
  kMeanSessionDuration = 2,   // consistency (minutes)
  kRelativeTimeOnline = 3,    // consistency (first-half share, [0,1])
  kRelativeVideoClicks = 4,   // consistency (first-half share, [0,1])
  kPeriodicityWeekDay = 5,    // regularity ([0,1])
  kPeriodicityWeekHour = 6,   // regularity ([0,1])
  kPeriodicityDayHour = 7,    // regularity ([0,1])
  kContentAnticipation = 8,   // proactivity (days, signed)
  kDelayLectureView = 9,      // proactivity (days, >= 0)
  kFracTimeVideo = 10,        // control (ratio)
  kPauseFrequency = 11,       // control (per video-hour)
  kAvgChangeRate = 12,        // control (per video)
  kCompetencyStrength = 13,   // assessment ([0,1])
  kStudentShape = 14,         // assessment ([0,1])
};
constexpr int kNumMeasures = 15;

enum class Dimension : int {
  Effort = 0,
  Consistency = 1,
  Regularity = 2,
  Proactivity = 3,
  Control = 4,
  Assessment = 5,
};
constexpr int kNumDimensions = 6;

const std::array<std::string, kNumMeasures>& measure_names();
const std::string& dimension_name(Dimension d);
Dimension dimension_of(Measure m);
/// Measures belonging to one dimension, in Measure order.
std::vector<Measure> measures_of(Dimension d);

struct MeasureVector {
  std::string student_id;
  std::array<double, kNumMeasures> values{};
  bool empty = false;  // no events in the considered window
};

/// The 15 behavioral measures for one student. An optional half-open time
/// window [window_start, window_end) in seconds restricts the computation;
/// inter-event gaps are attributed to the window containing their start so
/// that windowed totals add up.
MeasureVector compute_measures(const StudentTimeSeries& series, const CourseSchedule& schedule,
                               double window_start = 0.0,
                               double window_end = std::numeric_limits<double>::infinity());

/// Per-week measure matrix [visible weeks x 15]; visible weeks =
/// floor(e / 100 * n_weeks).
Eigen::MatrixXd weekly_features(const StudentTimeSeries& series, const CourseSchedule& schedule,
                                EarlyLevel level);

void save_measures(const std::filesystem::path& path, const std::vector<MeasureVector>& rows);
std::vector<MeasureVector> load_measures(const std::filesystem::path& path);

}  // namespace coursegraph
