#include "coursegraph/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace coursegraph {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// splitmix64-style stream derivation so each student gets an independent
// deterministic rng regardless of how many draws other students consumed.
uint64_t derive_seed(uint64_t seed, uint64_t index) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string student_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "s%05d", index);
  return buf;
}

// Weekly activity envelope: mixture of uniform / first-half / second-half.
std::vector<double> weekly_envelope(const LearnerProfile& p, int n_weeks) {
  const int half = (n_weeks + 1) / 2;
  std::vector<double> env(n_weeks, 0.0);
  for (int w = 0; w < n_weeks; ++w) {
    const double uniform = 1.0 / n_weeks;
    const double first = w < half ? 1.0 / half : 0.0;
    const double second = w >= half ? 1.0 / (n_weeks - half) : 0.0;
    env[w] = p.consistency[0] * uniform + p.consistency[1] * first + p.consistency[2] * second;
  }
  return env;
}

// Periodic bump kernel mixed with a uniform floor. The bump has to be sharp
// at high regularity so that even a handful of events lands in the preferred
// slots: regularity is then recoverable from sparse streams and does not act
// as a hidden event-count proxy.
std::vector<double> periodic_kernel(int n_bins, int center, double regularity) {
  const double kappa = 2.0 + 6.0 * regularity + 60.0 * regularity * regularity * regularity;
  const double floor = std::pow(1.0 - regularity, 3.0);
  std::vector<double> w(n_bins);
  for (int i = 0; i < n_bins; ++i) {
    const double d = 2.0 * M_PI * (i - center) / n_bins;
    w[i] = floor + regularity * std::exp(kappa * (std::cos(d) - 1.0));
  }
  return w;
}

LearnerProfile draw_profile(const GeneratorConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  LearnerProfile p;
  p.effort = u01(rng);
  double g0 = -std::log(u01(rng) + 1e-12) * 2.0;  // bias toward uniform shape
  double g1 = -std::log(u01(rng) + 1e-12);
  double g2 = -std::log(u01(rng) + 1e-12);
  const double gs = g0 + g1 + g2;
  p.consistency = {g0 / gs, g1 / gs, g2 / gs};
  p.regularity = u01(rng);
  p.proactivity = u01(rng);
  p.control = u01(rng);
  p.assessment = u01(rng);
  p.noise_level = 0.05 + 0.2 * u01(rng);

  const auto& ov = cfg.overrides;
  if (ov.effort) p.effort = *ov.effort;
  if (ov.consistency) p.consistency = *ov.consistency;
  if (ov.regularity) p.regularity = *ov.regularity;
  if (ov.proactivity) p.proactivity = *ov.proactivity;
  if (ov.control) p.control = *ov.control;
  if (ov.assessment) p.assessment = *ov.assessment;
  return p;
}

struct VideoIndex {
  std::vector<int> by_week_first;  // index of first video released in week w (or -1)
  std::vector<std::vector<int>> per_week;
};

}  // namespace

void GeneratorConfig::validate() const {
  if (n_students < 1) throw Error("generator: n_students must be >= 1");
  if (n_weeks < 1) throw Error("generator: n_weeks must be >= 1");
  if (n_videos < 1 || n_problems < 1)
    throw Error("generator: need at least one video and one problem");
  if (early_dropout_fraction < 0.0 || early_dropout_fraction > 1.0)
    throw Error("generator: early_dropout_fraction outside [0,1]");
}

CourseSchedule make_schedule(const GeneratorConfig& config) {
  CourseSchedule s;
  s.course_id = "synth";
  s.iteration = 1;
  s.n_weeks = config.n_weeks;
  s.passing_semantics = "labels provided externally";
  for (int i = 0; i < config.n_videos; ++i) {
    ScheduleObject o;
    o.object_id = "video_" + std::to_string(i);
    o.kind = ObjectKind::Video;
    o.release_week = 1 + i * config.n_weeks / config.n_videos;
    o.duration_seconds = 420.0 + 60.0 * (i % 5);
    s.objects.push_back(std::move(o));
  }
  for (int i = 0; i < config.n_problems; ++i) {
    ScheduleObject o;
    o.object_id = "problem_" + std::to_string(i);
    o.kind = ObjectKind::Problem;
    o.release_week = 1 + i * config.n_weeks / config.n_problems;
    o.deadline_week = std::min(config.n_weeks, o.release_week + 1);
    o.is_graded = (i % 4) != 3;
    s.objects.push_back(std::move(o));
  }
  s.validate();
  return s;
}

std::vector<Interaction> generate_student_stream(const GeneratorConfig& /*config*/,
                                                 const CourseSchedule& schedule,
                                                 const LearnerProfile& profile,
                                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int W = schedule.n_weeks;

  // Collect video / graded problem indices per release week.
  std::vector<std::vector<int>> videos_by_week(W + 1), problems_by_week(W + 1);
  std::vector<const ScheduleObject*> videos, problems;
  for (const auto& o : schedule.objects) {
    if (o.kind == ObjectKind::Video) {
      videos_by_week[o.release_week].push_back(static_cast<int>(videos.size()));
      videos.push_back(&o);
    } else {
      problems_by_week[o.release_week].push_back(static_cast<int>(problems.size()));
      problems.push_back(&o);
    }
  }
  if (videos.empty()) throw Error("generator: schedule has no videos");
  if (problems.empty()) throw Error("generator: schedule has no problems");

  std::vector<Interaction> out;

  if (profile.early_dropout) {
    // Early-dropout archetype: a handful of ungraded video interactions in
    // the first two weeks, then silence.
    const int n = 5 + static_cast<int>(u01(rng) * 15);
    for (int i = 0; i < n; ++i) {
      Interaction ev;
      const double week = u01(rng) * std::min(2, W);
      ev.t = week * kSecondsPerWeek;
      static const Action kDropActions[] = {Action::Load, Action::Play, Action::Pause,
                                            Action::Seek};
      ev.action = kDropActions[static_cast<int>(u01(rng) * 4)];
      int vid = videos_by_week[1].empty() ? 0 : videos_by_week[1][static_cast<size_t>(
                    u01(rng) * videos_by_week[1].size())];
      ev.video_id = vid;
      ev.object_id = videos[vid]->object_id;
      out.push_back(std::move(ev));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
    return out;
  }

  // Log-spaced so effort differences stay visible across the whole range:
  // sparse streams at the low end, dense ones at the high end.
  const double rate = 2.0 * std::pow(100.0, profile.effort);
  std::poisson_distribution<int> poisson(rate);
  const int n_events = std::min(poisson(rng), 1500);

  const auto env = weekly_envelope(profile, W);
  std::discrete_distribution<int> week_dist(env.begin(), env.end());
  const int pref_day = static_cast<int>(u01(rng) * 7);
  const int pref_hour = 8 + static_cast<int>(u01(rng) * 14);
  auto day_kernel = periodic_kernel(7, pref_day, profile.regularity);
  auto hour_kernel = periodic_kernel(24, pref_hour, profile.regularity);
  std::discrete_distribution<int> day_dist(day_kernel.begin(), day_kernel.end());
  std::discrete_distribution<int> hour_dist(hour_kernel.begin(), hour_kernel.end());

  // Video action mix; control scales the pause/seek/speed-change share.
  std::array<double, kNumVideoActions> action_w{};
  action_w[static_cast<int>(Action::Download)] = 0.05;
  action_w[static_cast<int>(Action::Error)] = 0.02;
  action_w[static_cast<int>(Action::Load)] = 0.20;
  action_w[static_cast<int>(Action::Pause)] = 0.05 + 0.30 * profile.control;
  action_w[static_cast<int>(Action::Play)] = 0.35;
  action_w[static_cast<int>(Action::Seek)] = 0.04 + 0.20 * profile.control;
  action_w[static_cast<int>(Action::SpeedChange)] = 0.02 + 0.15 * profile.control;
  action_w[static_cast<int>(Action::Stalled)] = 0.03;
  std::discrete_distribution<int> video_action_dist(action_w.begin(), action_w.end());

  // Per-problem planned attempt count: 1 + geometric failures, fewer
  // failures for stronger assessment skill.
  const double first_try_success = 0.15 + 0.80 * profile.assessment;
  std::map<int, int> planned_attempts, used_attempts;
  std::vector<int> open_problems;

  const double problem_share = 0.12 + 0.12 * profile.assessment;
  std::exponential_distribution<double> lag_dist(1.0 / (0.3 + 2.5 * (1.0 - profile.proactivity)));

  for (int i = 0; i < n_events; ++i) {
    const int week = week_dist(rng) + 1;  // 1-based
    const double t_base = (week - 1) * kSecondsPerWeek + day_dist(rng) * kSecondsPerDay +
                          hour_dist(rng) * 3600.0 + u01(rng) * 3600.0;
    const double t = std::min(t_base, schedule.duration_seconds() - 1.0);

    Interaction ev;
    ev.t = t;
    if (u01(rng) < problem_share) {
      // Re-attempt an unfinished problem, else pick one due around now.
      int pid = -1;
      if (!open_problems.empty() && u01(rng) < 0.7) {
        pid = open_problems[static_cast<size_t>(u01(rng) * open_problems.size())];
      } else {
        int pw = week;
        while (pw >= 1 && problems_by_week[pw].empty()) --pw;
        if (pw < 1) {
          pw = week;
          while (pw <= W && problems_by_week[pw].empty()) ++pw;
        }
        const auto& pool = problems_by_week[std::min(pw, W)];
        if (pool.empty()) continue;
        pid = pool[static_cast<size_t>(u01(rng) * pool.size())];
      }
      if (planned_attempts.find(pid) == planned_attempts.end()) {
        int attempts = 1;
        while (u01(rng) > first_try_success && attempts < 10) ++attempts;
        planned_attempts[pid] = attempts;
      }
      int& used = used_attempts[pid];
      used = std::min(used + 1, planned_attempts[pid]);
      if (used >= planned_attempts[pid]) {
        open_problems.erase(std::remove(open_problems.begin(), open_problems.end(), pid),
                            open_problems.end());
      } else if (std::find(open_problems.begin(), open_problems.end(), pid) ==
                 open_problems.end()) {
        open_problems.push_back(pid);
      }
      ev.action = u01(rng) < 0.6 ? Action::IsQuiz : Action::IsAssignment;
      ev.problem_id = pid;
      ev.submission_num = used;
      ev.object_id = problems[pid]->object_id;
    } else {
      // Target release week shifted by the proactivity lag; proactive
      // students occasionally touch next week's material early.
      int target = week - static_cast<int>(lag_dist(rng));
      if (u01(rng) < 0.25 * profile.proactivity) target = week + 1;
      target = std::clamp(target, 1, W);
      int vw = target;
      while (vw >= 1 && videos_by_week[vw].empty()) --vw;
      if (vw < 1) {
        vw = target;
        while (vw <= W && videos_by_week[vw].empty()) ++vw;
      }
      const auto& pool = videos_by_week[std::min(vw, W)];
      if (pool.empty()) continue;
      const int vid = pool[static_cast<size_t>(u01(rng) * pool.size())];
      ev.action = static_cast<Action>(video_action_dist(rng));
      ev.video_id = vid;
      ev.object_id = videos[vid]->object_id;
    }
    out.push_back(std::move(ev));
  }

  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  return out;
}

GeneratedCourse generate_course(const GeneratorConfig& config) {
  config.validate();
  GeneratedCourse course;
  course.schedule = make_schedule(config);

  const int n_dropouts =
      static_cast<int>(std::lround(config.early_dropout_fraction * config.n_students));

  for (int i = 0; i < config.n_students; ++i) {
    std::mt19937_64 rng(derive_seed(config.seed, static_cast<uint64_t>(i)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    LearnerProfile profile;
    // Spread planted dropouts deterministically across the index range.
    const bool dropout = n_dropouts > 0 && (i * n_dropouts / config.n_students) !=
                                               ((i + 1) * n_dropouts / config.n_students);
    if (dropout) {
      profile = LearnerProfile{};
      profile.effort = 0.02;
      profile.early_dropout = true;
    } else {
      profile = draw_profile(config, rng);
    }

    StudentTimeSeries s;
    s.student_id = student_name(i);
    s.interactions = generate_student_stream(config, course.schedule, profile, rng);
    for (auto& ev : s.interactions) ev.validate();

    if (profile.early_dropout) {
      s.label = 1;
    } else {
      const auto v = profile.as_vector();
      double z = config.label_bias;
      for (int k = 0; k < 6; ++k) z += config.label_weights[k] * v[k];
      s.label = u01(rng) < sigmoid(z) ? 1 : 0;
    }
    course.students.push_back(std::move(s));
    course.profiles.push_back(profile);
  }
  return course;
}

void save_profiles(const std::filesystem::path& path, const GeneratedCourse& course) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path.string());
  out << "student_id,effort,consist_uniform,consist_first,consist_second,"
         "regularity,proactivity,control,assessment,noise_level,early_dropout\n";
  for (size_t i = 0; i < course.students.size(); ++i) {
    const auto& p = course.profiles[i];
    out << course.students[i].student_id << "," << p.effort << "," << p.consistency[0] << ","
        << p.consistency[1] << "," << p.consistency[2] << "," << p.regularity << ","
        << p.proactivity << "," << p.control << "," << p.assessment << "," << p.noise_level << ","
        << (p.early_dropout ? 1 : 0) << "\n";
  }
}

}  // namespace coursegraph
