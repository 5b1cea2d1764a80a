#include "coursegraph/types.hpp"

#include <algorithm>

namespace coursegraph {

const std::array<std::string, kNumActionChannels>& ActionVocabulary::names() {
  static const std::array<std::string, kNumActionChannels> kNames = {
      "Download", "Error",       "Load",    "Pause",        "Play",
      "Seek",     "SpeedChange", "Stalled", "IsAssignment", "IsQuiz"};
  return kNames;
}

const std::string& ActionVocabulary::name(Action a) {
  return names()[static_cast<size_t>(a)];
}

std::optional<Action> ActionVocabulary::try_parse(const std::string& name) {
  const auto& all = names();
  for (int i = 0; i < kNumActionChannels; ++i) {
    if (all[i] == name) return static_cast<Action>(i);
  }
  return std::nullopt;
}

Action ActionVocabulary::parse(const std::string& name) {
  auto a = try_parse(name);
  if (!a) throw Error("unknown action identifier: '" + name + "'");
  return *a;
}

void Interaction::validate() const {
  if (t < 0.0) throw Error("interaction timestamp is negative");
  const bool video = ActionVocabulary::is_video(action);
  if (video) {
    if (!video_id || problem_id)
      throw Error("video action '" + ActionVocabulary::name(action) +
                  "' requires video_id and no problem_id");
    if (submission_num)
      throw Error("submission_num set on video action");
  } else {
    if (!problem_id || video_id)
      throw Error("problem action '" + ActionVocabulary::name(action) +
                  "' requires problem_id and no video_id");
    if (!submission_num)
      throw Error("submission_num missing on problem action");
    if (*submission_num < 0) throw Error("submission_num is negative");
  }
}

void StudentTimeSeries::sort_by_time() {
  std::stable_sort(interactions.begin(), interactions.end(),
                   [](const Interaction& a, const Interaction& b) { return a.t < b.t; });
}

int CourseSchedule::n_videos() const {
  return static_cast<int>(std::count_if(objects.begin(), objects.end(), [](const auto& o) {
    return o.kind == ObjectKind::Video;
  }));
}

int CourseSchedule::n_problems() const {
  return static_cast<int>(objects.size()) - n_videos();
}

void CourseSchedule::validate() const {
  if (n_weeks < 1) throw Error("schedule: n_weeks must be positive");
  for (const auto& o : objects) {
    if (o.release_week < 1 || o.release_week > n_weeks)
      throw Error("schedule object '" + o.object_id + "': release_week out of range");
    if (o.kind == ObjectKind::Problem && o.deadline_week < o.release_week)
      throw Error("schedule object '" + o.object_id + "': deadline before release");
  }
}

}  // namespace coursegraph
