#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace coursegraph {

/// Base error type for the toolkit. Carries a human-readable message.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// The 10 event types of the clickstream: 8 video actions followed by
/// 2 problem actions. Enum values double as channel indices 0..9.
enum class Action : int {
  Download = 0,
  Error = 1,
  Load = 2,
  Pause = 3,
  Play = 4,
  Seek = 5,
  SpeedChange = 6,
  Stalled = 7,
  IsAssignment = 8,
  IsQuiz = 9,
};

constexpr int kNumActionChannels = 10;
constexpr int kNumVideoActions = 8;

// Metadata channels appended after the action channels.
constexpr int kChannelVideoId = 10;
constexpr int kChannelProblemId = 11;
constexpr int kChannelSubmissionNum = 12;
constexpr int kNumChannels = 13;

constexpr double kSecondsPerDay = 86400.0;
constexpr double kSecondsPerWeek = 7.0 * kSecondsPerDay;

/// Fixed vocabulary over the 10 actions with name <-> channel mapping.
struct ActionVocabulary {
  static const std::array<std::string, kNumActionChannels>& names();
  static const std::string& name(Action a);
  /// Throws Error on unknown identifier.
  static Action parse(const std::string& name);
  static std::optional<Action> try_parse(const std::string& name);
  static bool is_video(Action a) { return static_cast<int>(a) < kNumVideoActions; }
  static bool is_problem(Action a) { return !is_video(a); }
  static int channel(Action a) { return static_cast<int>(a); }
};

/// One timestamped event. Exactly one of video_id / problem_id is set,
/// matching the action kind; submission_num is present iff the action is
/// a problem action.
struct Interaction {
  double t = 0.0;  // seconds since course start
  Action action = Action::Load;
  std::string object_id;
  std::optional<int> video_id;
  std::optional<int> problem_id;
  std::optional<int> submission_num;

  /// Throws Error when the metadata does not match the action kind.
  void validate() const;
};

/// Time-ordered interactions of a single student plus the pass/fail label
/// (0 = pass, 1 = fail).
struct StudentTimeSeries {
  std::string student_id;
  std::vector<Interaction> interactions;
  int label = 0;

  /// Stable sort by timestamp; equal timestamps keep input order.
  void sort_by_time();
};

enum class ObjectKind { Video, Problem };

struct ScheduleObject {
  std::string object_id;
  ObjectKind kind = ObjectKind::Video;
  int release_week = 1;               // 1-based
  int deadline_week = 1;              // problems only
  double duration_seconds = 0.0;      // videos only
  bool is_graded = false;
};

/// Course structure: weeks, learning objects, release/deadline calendar.
struct CourseSchedule {
  std::string course_id;
  int iteration = 1;
  int n_weeks = 1;
  std::vector<ScheduleObject> objects;
  std::string passing_semantics;

  double duration_seconds() const { return n_weeks * kSecondsPerWeek; }
  int n_videos() const;
  int n_problems() const;
  /// Release instant of an object (start of its release week).
  static double week_start_seconds(int week) { return (week - 1) * kSecondsPerWeek; }

  void validate() const;
};

/// Disjoint train/validation/test partition of student ids.
struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  uint64_t seed = 0;
};

}  // namespace coursegraph
