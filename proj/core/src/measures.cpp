#include "coursegraph/measures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace coursegraph {

namespace {

constexpr double kSessionGapSeconds = 30.0 * 60.0;

// Chance-corrected slot concentration: normalized chi-square against the
// uniform histogram with the E[chi2] = B - 1 sampling bias removed, so a
// uniform random stream scores near 0 at every event count instead of
// inheriting the sparse-sample entropy floor. Exactly 1 when every event
// shares one slot.
double slot_periodicity(const std::vector<int>& hist) {
  double n = 0;
  for (int c : hist) n += c;
  if (n < 2.0) return 0.0;
  const double bins = static_cast<double>(hist.size());
  const double expected = n / bins;
  double chi2 = 0.0;
  for (int c : hist) chi2 += (c - expected) * (c - expected) / expected;
  const double corrected = (chi2 - (bins - 1.0)) / ((n - 1.0) * (bins - 1.0));
  return std::clamp(corrected, 0.0, 1.0);
}

}  // namespace

const std::array<std::string, kNumMeasures>& measure_names() {
  static const std::array<std::string, kNumMeasures> kNames = {
      "total_time_online",     "total_video_clicks",   "mean_session_duration",
      "relative_time_online",  "relative_video_clicks", "periodicity_week_day",
      "periodicity_week_hour", "periodicity_day_hour",  "content_anticipation",
      "delay_lecture_view",    "frac_time_video",       "pause_frequency",
      "avg_change_rate",       "competency_strength",   "student_shape"};
  return kNames;
}

const std::string& dimension_name(Dimension d) {
  static const std::array<std::string, kNumDimensions> kNames = {
      "effort", "consistency", "regularity", "proactivity", "control", "assessment"};
  return kNames[static_cast<size_t>(d)];
}

Dimension dimension_of(Measure m) {
  if (m <= kTotalVideoClicks) return Dimension::Effort;
  if (m <= kRelativeVideoClicks) return Dimension::Consistency;
  if (m <= kPeriodicityDayHour) return Dimension::Regularity;
  if (m <= kDelayLectureView) return Dimension::Proactivity;
  if (m <= kAvgChangeRate) return Dimension::Control;
  return Dimension::Assessment;
}

std::vector<Measure> measures_of(Dimension d) {
  std::vector<Measure> out;
  for (int i = 0; i < kNumMeasures; ++i)
    if (dimension_of(static_cast<Measure>(i)) == d) out.push_back(static_cast<Measure>(i));
  return out;
}

MeasureVector compute_measures(const StudentTimeSeries& series, const CourseSchedule& schedule,
                               double window_start, double window_end) {
  MeasureVector mv;
  mv.student_id = series.student_id;

  const auto& all = series.interactions;
  std::vector<size_t> idx;  // events inside the window
  for (size_t i = 0; i < all.size(); ++i)
    if (all[i].t >= window_start && all[i].t < window_end) idx.push_back(i);
  if (idx.empty()) {
    mv.empty = true;
    return mv;
  }

  // --- effort: time online from inter-event gaps under the session rule;
  // a gap belongs to the window containing its start.
  double online_seconds = 0.0;
  for (size_t i = 0; i + 1 < all.size(); ++i) {
    const double gap = all[i + 1].t - all[i].t;
    if (gap < kSessionGapSeconds && all[i].t >= window_start && all[i].t < window_end)
      online_seconds += gap;
  }
  mv.values[kTotalTimeOnline] = online_seconds / 3600.0;

  int video_clicks = 0, video_clicks_first_half = 0;
  for (size_t i : idx)
    if (ActionVocabulary::is_video(all[i].action)) {
      ++video_clicks;
      if (all[i].t < schedule.duration_seconds() / 2.0) ++video_clicks_first_half;
    }
  mv.values[kTotalVideoClicks] = video_clicks;

  // --- consistency: sessions over window events.
  std::vector<std::pair<double, double>> sessions;  // (first, last)
  for (size_t k = 0; k < idx.size(); ++k) {
    const double t = all[idx[k]].t;
    if (sessions.empty() || t - sessions.back().second >= kSessionGapSeconds)
      sessions.emplace_back(t, t);
    else
      sessions.back().second = t;
  }
  double session_minutes = 0.0;
  for (const auto& [a, b] : sessions) session_minutes += (b - a) / 60.0;
  mv.values[kMeanSessionDuration] = session_minutes / sessions.size();

  const double half_point = schedule.duration_seconds() / 2.0;
  double online_first_half = 0.0;
  for (size_t i = 0; i + 1 < all.size(); ++i) {
    const double gap = all[i + 1].t - all[i].t;
    if (gap < kSessionGapSeconds && all[i].t >= window_start && all[i].t < window_end &&
        all[i].t < half_point)
      online_first_half += gap;
  }
  mv.values[kRelativeTimeOnline] =
      online_seconds > 0 ? online_first_half / online_seconds : 0.0;
  mv.values[kRelativeVideoClicks] =
      video_clicks > 0 ? static_cast<double>(video_clicks_first_half) / video_clicks : 0.0;

  // --- regularity: chance-corrected concentration of slot histograms.
  std::vector<int> weekday(7, 0), week_hour(168, 0), day_hour(24, 0);
  for (size_t i : idx) {
    const auto hours = static_cast<long long>(all[i].t / 3600.0);
    const auto days = static_cast<long long>(all[i].t / kSecondsPerDay);
    ++weekday[days % 7];
    ++week_hour[hours % 168];
    ++day_hour[hours % 24];
  }
  mv.values[kPeriodicityWeekDay] = slot_periodicity(weekday);
  mv.values[kPeriodicityWeekHour] = slot_periodicity(week_hour);
  mv.values[kPeriodicityDayHour] = slot_periodicity(day_hour);

  // --- proactivity: first views vs release instants.
  std::map<int, double> first_view;  // video index -> t
  for (size_t i : idx) {
    const auto& ev = all[i];
    if (!ev.video_id) continue;
    auto [it, inserted] = first_view.emplace(*ev.video_id, ev.t);
    if (!inserted) it->second = std::min(it->second, ev.t);
  }
  std::vector<double> video_release;
  std::vector<double> video_duration;
  for (const auto& o : schedule.objects) {
    if (o.kind != ObjectKind::Video) continue;
    video_release.push_back(CourseSchedule::week_start_seconds(o.release_week));
    video_duration.push_back(o.duration_seconds);
  }
  if (!first_view.empty()) {
    double anticipation = 0.0, delay = 0.0;
    for (const auto& [vid, t] : first_view) {
      const double release = video_release[static_cast<size_t>(vid)];
      anticipation += (release - t) / kSecondsPerDay;
      delay += std::max(0.0, t - release) / kSecondsPerDay;
    }
    mv.values[kContentAnticipation] = anticipation / first_view.size();
    mv.values[kDelayLectureView] = delay / first_view.size();
  }

  // --- control: approximate watch time from consecutive same-video gaps,
  // each gap capped at twice the video duration.
  std::map<int, double> watch_seconds;
  std::map<int, double> last_event_t;
  int pause_count = 0, speed_changes = 0;
  for (size_t i : idx) {
    const auto& ev = all[i];
    if (ev.action == Action::Pause) ++pause_count;
    if (ev.action == Action::SpeedChange) ++speed_changes;
    if (!ev.video_id) continue;
    auto it = last_event_t.find(*ev.video_id);
    if (it != last_event_t.end()) {
      const double cap = 2.0 * video_duration[static_cast<size_t>(*ev.video_id)];
      watch_seconds[*ev.video_id] += std::min(ev.t - it->second, cap);
    }
    last_event_t[*ev.video_id] = ev.t;
  }
  double total_watch = 0.0, capped_watch = 0.0, total_scheduled = 0.0;
  for (double d : video_duration) total_scheduled += d;
  for (const auto& [vid, w] : watch_seconds) {
    total_watch += w;
    capped_watch += std::min(w, video_duration[static_cast<size_t>(vid)]);
  }
  mv.values[kFracTimeVideo] = total_scheduled > 0 ? capped_watch / total_scheduled : 0.0;
  mv.values[kPauseFrequency] = total_watch > 0 ? pause_count / (total_watch / 3600.0) : 0.0;
  mv.values[kAvgChangeRate] =
      first_view.empty() ? 0.0 : static_cast<double>(speed_changes) / first_view.size();

  // --- assessment over graded problems.
  std::set<int> graded_ids;
  int pi = 0;
  for (const auto& o : schedule.objects) {
    if (o.kind != ObjectKind::Problem) continue;
    if (o.is_graded) graded_ids.insert(pi);
    ++pi;
  }
  std::map<int, int> max_submission;
  for (size_t i : idx) {
    const auto& ev = all[i];
    if (!ev.problem_id || !graded_ids.count(*ev.problem_id)) continue;
    int& m = max_submission[*ev.problem_id];
    m = std::max(m, ev.submission_num.value_or(0));
  }
  if (!max_submission.empty()) {
    int first_try = 0;
    for (const auto& [pid, m] : max_submission)
      if (m == 1) ++first_try;
    mv.values[kCompetencyStrength] = static_cast<double>(first_try) / max_submission.size();
    mv.values[kStudentShape] = graded_ids.empty()
                                   ? 0.0
                                   : static_cast<double>(max_submission.size()) / graded_ids.size();
  }
  return mv;
}

Eigen::MatrixXd weekly_features(const StudentTimeSeries& series, const CourseSchedule& schedule,
                                EarlyLevel level) {
  const int weeks_visible =
      static_cast<int>(std::floor(level.e / 100.0 * schedule.n_weeks + 1e-9));
  if (weeks_visible < 1) throw Error("weekly_features: horizon shorter than one week");
  Eigen::MatrixXd rows(weeks_visible, kNumMeasures);
  for (int w = 0; w < weeks_visible; ++w) {
    const auto mv = compute_measures(series, schedule, w * kSecondsPerWeek,
                                     (w + 1) * kSecondsPerWeek);
    for (int j = 0; j < kNumMeasures; ++j) rows(w, j) = mv.values[j];
  }
  return rows;
}

void save_measures(const std::filesystem::path& path, const std::vector<MeasureVector>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path.string());
  out << "student_id";
  for (const auto& name : measure_names()) out << "," << name;
  out << ",empty\n";
  out.precision(10);
  for (const auto& mv : rows) {
    out << mv.student_id;
    for (double v : mv.values) out << "," << v;
    out << "," << (mv.empty ? 1 : 0) << "\n";
  }
}

std::vector<MeasureVector> load_measures(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path.string());
  std::vector<MeasureVector> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    MeasureVector mv;
    std::getline(ss, mv.student_id, ',');
    for (int j = 0; j < kNumMeasures; ++j) {
      std::getline(ss, cell, ',');
      mv.values[j] = std::stod(cell);
    }
    std::getline(ss, cell, ',');
    mv.empty = cell == "1";
    rows.push_back(std::move(mv));
  }
  return rows;
}

}  // namespace coursegraph
