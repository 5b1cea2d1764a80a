#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "coursegraph/types.hpp"

namespace coursegraph::testing {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline CourseSchedule toy_schedule(int n_weeks = 10, int n_videos = 10,
                                   int n_problems = 5) {
  CourseSchedule s;
  s.course_id = "toy";
  s.iteration = 1;
  s.n_weeks = n_weeks;
  for (int i = 0; i < n_videos; ++i) {
    ScheduleObject o;
    o.object_id = "video_" + std::to_string(i);
    o.kind = ObjectKind::Video;
    o.release_week = 1 + i % n_weeks;
    o.deadline_week = o.release_week;
    o.duration_seconds = 600.0;
    s.objects.push_back(o);
  }
  for (int i = 0; i < n_problems; ++i) {
    ScheduleObject o;
    o.object_id = "problem_" + std::to_string(i);
    o.kind = ObjectKind::Problem;
    o.release_week = 1 + i % n_weeks;
    o.deadline_week = std::min(n_weeks, o.release_week + 1);
    o.is_graded = true;
    s.objects.push_back(o);
  }
  s.validate();
  return s;
}

inline Interaction video_event(double t, Action a, int video_id) {
  Interaction e;
  e.t = t;
  e.action = a;
  e.object_id = "video_" + std::to_string(video_id);
  e.video_id = video_id;
  return e;
}

inline Interaction problem_event(double t, Action a, int problem_id, int submission) {
  Interaction e;
  e.t = t;
  e.action = a;
  e.object_id = "problem_" + std::to_string(problem_id);
  e.problem_id = problem_id;
  e.submission_num = submission;
  return e;
}

}  // namespace coursegraph::testing
