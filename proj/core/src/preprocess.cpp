#include "coursegraph/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "coursegraph/logistic.hpp"
#include "json.hpp"

namespace coursegraph {

StudentTimeSeries truncate(const StudentTimeSeries& series, const CourseSchedule& schedule,
                           EarlyLevel level) {
  if (level.e <= 0.0 || level.e > 100.0)
    throw Error("truncate: early level must lie in (0, 100]");
  const double horizon = level.horizon_seconds(schedule);
  StudentTimeSeries out;
  out.student_id = series.student_id;
  out.label = series.label;
  for (const auto& ev : series.interactions)
    if (ev.t <= horizon) out.interactions.push_back(ev);
  return out;
}

EncodedSeries encode(const StudentTimeSeries& series, const CourseSchedule& schedule) {
  const int n_videos = schedule.n_videos();
  const int n_problems = schedule.n_problems();
  EncodedSeries enc;
  enc.student_id = series.student_id;
  enc.label = series.label;

  auto push = [&enc](double t_days, int channel, double value) {
    enc.times.push_back(t_days);
    enc.channels.push_back(channel);
    enc.values.push_back(value);
  };

  for (const auto& ev : series.interactions) {
    const double t_days = ev.t / kSecondsPerDay;
    push(t_days, ActionVocabulary::channel(ev.action), 1.0);
    if (ev.video_id) {
      if (*ev.video_id < 0 || *ev.video_id >= n_videos)
        throw Error("encode: video index out of schedule range for student " + series.student_id);
      push(t_days, kChannelVideoId, (*ev.video_id + 1) / static_cast<double>(n_videos));
    }
    if (ev.problem_id) {
      if (*ev.problem_id < 0 || *ev.problem_id >= n_problems)
        throw Error("encode: problem index out of schedule range for student " +
                    series.student_id);
      push(t_days, kChannelProblemId, (*ev.problem_id + 1) / static_cast<double>(n_problems));
      push(t_days, kChannelSubmissionNum, std::min(*ev.submission_num, 10) / 10.0);
    }
  }
  return enc;
}

std::string FilterReport::to_json() const {
  nlohmann::json j{{"weeks", weeks},
                   {"threshold", threshold},
                   {"n_removed", n_removed},
                   {"precision_on_removed", precision_on_removed},
                   {"heldout_precision", heldout_precision}};
  if (!warning.empty()) j["warning"] = warning;
  return j.dump(2);
}

namespace {

Eigen::Vector3d filter_features(const StudentTimeSeries& s, const CourseSchedule& schedule,
                                int weeks) {
  const double horizon = weeks * kSecondsPerWeek;
  double n_assign = 0, n_quiz = 0;
  std::set<int> graded;
  std::set<int> graded_problem_ids;
  int pi = 0;
  for (const auto& o : schedule.objects) {
    if (o.kind == ObjectKind::Problem) {
      if (o.is_graded) graded_problem_ids.insert(pi);
      ++pi;
    }
  }
  for (const auto& ev : s.interactions) {
    if (ev.t > horizon) break;
    if (ev.action == Action::IsAssignment) ++n_assign;
    if (ev.action == Action::IsQuiz) ++n_quiz;
    if (ev.problem_id && graded_problem_ids.count(*ev.problem_id)) graded.insert(*ev.problem_id);
  }
  return {n_assign, n_quiz, static_cast<double>(graded.size())};
}

}  // namespace

FilterResult early_dropout_filter(const std::vector<StudentTimeSeries>& students,
                                  const CourseSchedule& schedule, int weeks,
                                  double accuracy_threshold) {
  if (weeks < 1) throw Error("early_dropout_filter: weeks must be >= 1");
  if (accuracy_threshold <= 0.5 || accuracy_threshold > 1.0)
    throw Error("early_dropout_filter: threshold must lie in (0.5, 1]");

  const auto n = students.size();
  FilterResult result;
  result.report.weeks = weeks;
  result.report.threshold = accuracy_threshold;

  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd y(n);
  bool any_assignment = false;
  for (size_t i = 0; i < n; ++i) {
    X.row(i) = filter_features(students[i], schedule, weeks).transpose();
    y(i) = students[i].label;
    if (X(i, 0) + X(i, 1) > 0) any_assignment = true;
  }
  if (!any_assignment || y.sum() == 0 || y.sum() == static_cast<double>(n)) {
    result.kept = students;
    result.report.warning = "degenerate input (no assignment signal or single class); "
                            "no students removed";
    return result;
  }

  // Held-out fail probabilities via 5-fold cross-fitting.
  const int k_folds = 5;
  Eigen::VectorXd p_heldout = Eigen::VectorXd::Zero(n);
  for (int fold = 0; fold < k_folds; ++fold) {
    std::vector<int> train_rows, test_rows;
    for (size_t i = 0; i < n; ++i)
      (static_cast<int>(i % k_folds) == fold ? test_rows : train_rows).push_back(i);
    Eigen::MatrixXd Xt(train_rows.size(), 3);
    Eigen::VectorXd yt(train_rows.size());
    for (size_t r = 0; r < train_rows.size(); ++r) {
      Xt.row(r) = X.row(train_rows[r]);
      yt(r) = y(train_rows[r]);
    }
    if (yt.sum() == 0 || yt.sum() == static_cast<double>(yt.size())) continue;
    LogisticFitOptions opts;
    opts.balanced = true;
    const auto model = fit_logistic(Xt, yt, opts);
    for (int i : test_rows) p_heldout(i) = model.predict_proba(X.row(i).transpose());
  }

  // Smallest cutoff whose held-out removed set keeps precision at target.
  std::vector<std::pair<double, int>> ranked;  // (prob, label)
  for (size_t i = 0; i < n; ++i) ranked.emplace_back(p_heldout(i), static_cast<int>(y(i)));
  std::sort(ranked.begin(), ranked.end(), std::greater<>());
  double cutoff = 2.0;  // above 1: remove nobody
  double best_precision = 0.0;
  int fails = 0;
  for (size_t i = 0; i < ranked.size(); ++i) {
    fails += ranked[i].second;
    // Closed cutoff: include ties on the probability boundary.
    if (i + 1 < ranked.size() && ranked[i + 1].first == ranked[i].first) continue;
    const double precision = static_cast<double>(fails) / (i + 1);
    // A handful of lucky fails is not evidence; require a minimal set for
    // the precision estimate to mean anything.
    if (i + 1 >= 5 && ranked[i].first > 0.5 && precision >= accuracy_threshold) {
      cutoff = ranked[i].first;
      best_precision = precision;
    }
  }

  LogisticFitOptions full_opts;
  full_opts.balanced = true;
  const auto final_model = fit_logistic(X, y, full_opts);
  bool use_heldout = cutoff <= 1.0;
  if (!use_heldout && y.sum() < k_folds) {
    // Too few fail examples for the folds to score (e.g. one planted
    // dropout): calibrate on the full-fit probabilities instead.
    std::vector<std::pair<double, int>> full_ranked;
    for (size_t i = 0; i < n; ++i)
      full_ranked.emplace_back(final_model.predict_proba(X.row(i).transpose()),
                               static_cast<int>(y(i)));
    std::sort(full_ranked.begin(), full_ranked.end(), std::greater<>());
    int full_fails = 0;
    for (size_t i = 0; i < full_ranked.size(); ++i) {
      full_fails += full_ranked[i].second;
      if (i + 1 < full_ranked.size() && full_ranked[i + 1].first == full_ranked[i].first)
        continue;
      const double precision = static_cast<double>(full_fails) / (i + 1);
      if (full_ranked[i].first > 0.5 && precision >= accuracy_threshold) {
        cutoff = full_ranked[i].first;
        best_precision = precision;
      }
    }
  }
  if (cutoff > 1.0) {
    result.kept = students;
    result.report.warning = "no cutoff met the precision target; no students removed";
    return result;
  }
  result.report.heldout_precision = best_precision;

  int removed_fails = 0;
  for (size_t i = 0; i < n; ++i) {
    const double p_full = final_model.predict_proba(X.row(i).transpose());
    const double p_cv = use_heldout ? p_heldout(i) : p_full;
    if (p_cv >= cutoff && p_full > 0.5) {
      result.removed.push_back(students[i]);
      removed_fails += students[i].label;
    } else {
      result.kept.push_back(students[i]);
    }
  }
  result.report.n_removed = static_cast<int>(result.removed.size());
  result.report.precision_on_removed =
      result.removed.empty() ? 0.0
                             : static_cast<double>(removed_fails) / result.removed.size();
  return result;
}

FilterResult select_filter_operating_point(const std::vector<StudentTimeSeries>& students,
                                           const CourseSchedule& schedule,
                                           const std::vector<double>& thresholds) {
  FilterResult best;
  bool have_best = false;
  for (int weeks : {1, 2, 3}) {
    for (double threshold : thresholds) {
      auto candidate = early_dropout_filter(students, schedule, weeks, threshold);
      const bool ok = candidate.report.warning.empty() &&
                      candidate.report.precision_on_removed >= threshold;
      if (!ok) continue;
      if (!have_best || candidate.report.n_removed > best.report.n_removed ||
          (candidate.report.n_removed == best.report.n_removed &&
           candidate.report.threshold < threshold)) {
        best = std::move(candidate);
        have_best = true;
      }
    }
  }
  if (!have_best) {
    // Default operating point; may legitimately remove nobody.
    best = early_dropout_filter(students, schedule, 2, 0.99);
  }
  return best;
}

}  // namespace coursegraph
