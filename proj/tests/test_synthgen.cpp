#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doctest.h"

#include "coursegraph/io.hpp"
#include "coursegraph/synthgen.hpp"
#include "helpers.hpp"

using namespace coursegraph;
using coursegraph::testing::TempDir;

namespace {

GeneratorConfig base_config(int n_students = 2000, uint64_t seed = 42) {
  GeneratorConfig cfg;
  cfg.n_students = n_students;
  cfg.n_weeks = 10;
  cfg.n_videos = 20;
  cfg.n_problems = 10;
  cfg.seed = seed;
  return cfg;
}

double mean_event_count(const GeneratedCourse& course) {
  double total = 0.0;
  for (const auto& s : course.students) total += static_cast<double>(s.interactions.size());
  return total / static_cast<double>(course.students.size());
}

}  // namespace

TEST_CASE("zero label weights give an empirical fail rate near one half") {
  GeneratorConfig cfg = base_config();
  const GeneratedCourse course = generate_course(cfg);
  double fails = 0.0;
  for (const auto& s : course.students) fails += s.label;
  const double rate = fails / cfg.n_students;
  CHECK(rate > 0.45);
  CHECK(rate < 0.55);
}

TEST_CASE("higher effort cohorts emit strictly more events on average") {
  GeneratorConfig lo = base_config(300, 7);
  lo.overrides.effort = 0.0;
  GeneratorConfig hi = lo;
  hi.overrides.effort = 1.0;
  const double mean_lo = mean_event_count(generate_course(lo));
  const double mean_hi = mean_event_count(generate_course(hi));
  CHECK(mean_hi > mean_lo);
  // The spread is wide enough to be unambiguous, not a tie broken by noise.
  CHECK(mean_hi > 5.0 * std::max(mean_lo, 1.0));
}

TEST_CASE("same seed produces byte-identical JSONL output") {
  TempDir dir("synthgen-det");
  GeneratorConfig cfg = base_config(150, 42);
  const GeneratedCourse a = generate_course(cfg);
  const GeneratedCourse b = generate_course(cfg);
  save_clickstream(dir / "a.jsonl", a.students);
  save_clickstream(dir / "b.jsonl", b.students);

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string ta = slurp(dir / "a.jsonl");
  CHECK(ta == slurp(dir / "b.jsonl"));
  CHECK_FALSE(ta.empty());

  GeneratorConfig other = cfg;
  other.seed = 43;
  save_clickstream(dir / "c.jsonl", generate_course(other).students);
  CHECK(ta != slurp(dir / "c.jsonl"));
}

TEST_CASE("effort-weighted labels correlate effort with passing") {
  GeneratorConfig cfg = base_config(2000, 5);
  cfg.label_weights = {-8, 0, 0, 0, 0, 0};
  cfg.label_bias = 4.0;
  const GeneratedCourse course = generate_course(cfg);

  const int n = cfg.n_students;
  double me = 0.0, mp = 0.0;
  for (int i = 0; i < n; ++i) {
    me += course.profiles[i].effort;
    mp += 1.0 - course.students[i].label;  // pass indicator
  }
  me /= n;
  mp /= n;
  double cov = 0.0, ve = 0.0, vp = 0.0;
  for (int i = 0; i < n; ++i) {
    const double de = course.profiles[i].effort - me;
    const double dp = (1.0 - course.students[i].label) - mp;
    cov += de * dp;
    ve += de * de;
    vp += dp * dp;
  }
  const double corr = cov / std::sqrt(ve * vp);
  CHECK(corr > 0.5);
}

TEST_CASE("planted early dropouts stop after week two and fail") {
  GeneratorConfig cfg = base_config(200, 9);
  cfg.early_dropout_fraction = 0.25;
  const GeneratedCourse course = generate_course(cfg);

  int dropouts = 0;
  for (size_t i = 0; i < course.students.size(); ++i) {
    if (!course.profiles[i].early_dropout) continue;
    ++dropouts;
    const auto& s = course.students[i];
    CHECK(s.label == 1);
    CHECK_FALSE(s.interactions.empty());
    for (const auto& ev : s.interactions) {
      CHECK(ev.t <= 2.0 * 7.0 * 86400.0);
      CHECK_FALSE(ev.problem_id.has_value());
      CHECK_FALSE(ev.submission_num.has_value());
    }
  }
  CHECK(dropouts == 50);
}

TEST_CASE("every generated event satisfies the clickstream invariants") {
  GeneratorConfig cfg = base_config(120, 3);
  cfg.early_dropout_fraction = 0.1;
  const GeneratedCourse course = generate_course(cfg);
  CHECK_NOTHROW(course.schedule.validate());
  const double horizon = course.schedule.duration_seconds();
  for (const auto& s : course.students) {
    double prev = 0.0;
    for (const auto& ev : s.interactions) {
      CHECK_NOTHROW(ev.validate());
      CHECK(ev.t >= prev);
      CHECK(ev.t <= horizon);
      prev = ev.t;
    }
  }
}

TEST_CASE("assessment skill lowers the submission numbers on problems") {
  GeneratorConfig weak = base_config(300, 21);
  weak.overrides.assessment = 0.05;
  weak.overrides.effort = 0.8;
  GeneratorConfig strong = weak;
  strong.overrides.assessment = 0.95;

  auto mean_submission = [](const GeneratedCourse& course) {
    double total = 0.0;
    int n = 0;
    for (const auto& s : course.students)
      for (const auto& ev : s.interactions)
        if (ev.submission_num) {
          total += *ev.submission_num;
          ++n;
        }
    REQUIRE(n > 0);
    return total / n;
  };
  CHECK(mean_submission(generate_course(weak)) > mean_submission(generate_course(strong)) + 0.3);
}

TEST_CASE("invalid generator configs are rejected") {
  GeneratorConfig cfg = base_config();
  cfg.n_students = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = base_config();
  cfg.early_dropout_fraction = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = base_config();
  cfg.n_videos = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("profiles CSV aligns with students and records ground truth") {
  TempDir dir("synthgen-profiles");
  GeneratorConfig cfg = base_config(50, 2);
  cfg.early_dropout_fraction = 0.1;
  const GeneratedCourse course = generate_course(cfg);
  save_profiles(dir / "profiles.csv", course);

  std::ifstream in(dir / "profiles.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line.find("student_id,effort") == 0);
  int rows = 0;
  while (std::getline(in, line)) {
    REQUIRE(rows < static_cast<int>(course.students.size()));
    CHECK(line.find(course.students[rows].student_id + ",") == 0);
    ++rows;
  }
  CHECK(rows == 50);
}
