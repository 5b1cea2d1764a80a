#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"

#include "coursegraph/preprocess.hpp"
#include "coursegraph/synthgen.hpp"
#include "helpers.hpp"

using namespace coursegraph;
using coursegraph::testing::problem_event;
using coursegraph::testing::toy_schedule;
using coursegraph::testing::video_event;

TEST_CASE("truncate keeps events up to the early horizon") {
  const CourseSchedule schedule = toy_schedule(10);
  StudentTimeSeries s;
  s.student_id = "s1";
  s.label = 1;
  s.interactions.push_back(video_event(41.0 * 86400.0, Action::Play, 0));
  s.interactions.push_back(video_event(42.0 * 86400.0, Action::Play, 1));
  s.interactions.push_back(video_event(42.0 * 86400.0 + 1.0, Action::Play, 2));
  s.interactions.push_back(video_event(60.0 * 86400.0, Action::Play, 3));

  SUBCASE("e = 60 on a 10-week course cuts at day 42") {
    const StudentTimeSeries t = truncate(s, schedule, EarlyLevel{60.0});
    REQUIRE(t.interactions.size() == 2);
    CHECK(t.interactions[1].t == 42.0 * 86400.0);
    CHECK(t.label == 1);
  }
  SUBCASE("e = 100 is the identity") {
    const StudentTimeSeries t = truncate(s, schedule, EarlyLevel{100.0});
    CHECK(t.interactions.size() == s.interactions.size());
  }
  SUBCASE("invalid levels are rejected") {
    CHECK_THROWS_AS(truncate(s, schedule, EarlyLevel{0.0}), Error);
    CHECK_THROWS_AS(truncate(s, schedule, EarlyLevel{120.0}), Error);
  }
}

TEST_CASE("truncate e = 40 on a 5-week course keeps days {1, 13}") {
  const CourseSchedule schedule = toy_schedule(5, 5, 2);
  StudentTimeSeries s;
  s.student_id = "s1";
  for (double day : {1.0, 13.0, 15.0, 20.0})
    s.interactions.push_back(video_event(day * 86400.0, Action::Play, 0));
  const StudentTimeSeries t = truncate(s, schedule, EarlyLevel{40.0});
  REQUIRE(t.interactions.size() == 2);
  CHECK(t.interactions[0].t == 1.0 * 86400.0);
  CHECK(t.interactions[1].t == 13.0 * 86400.0);
}

TEST_CASE("encode emits action plus metadata observations in day units") {
  const CourseSchedule schedule = toy_schedule(10, 10, 5);

  SUBCASE("Play on video 3 of 10 at one day") {
    StudentTimeSeries s;
    s.student_id = "s1";
    s.interactions.push_back(video_event(86400.0, Action::Play, 3));
    const EncodedSeries enc = encode(s, schedule);
    REQUIRE(enc.length() == 2);
    CHECK(enc.times[0] == doctest::Approx(1.0));
    CHECK(enc.times[1] == doctest::Approx(1.0));
    CHECK(enc.channels[0] == ActionVocabulary::channel(Action::Play));
    CHECK(enc.values[0] == 1.0);
    CHECK(enc.channels[1] == 10);  // Video ID channel
    CHECK(enc.values[1] == doctest::Approx(0.4));
  }

  SUBCASE("problem events carry problem and submission channels") {
    StudentTimeSeries s;
    s.student_id = "s1";
    s.interactions.push_back(problem_event(2.0 * 86400.0, Action::IsQuiz, 1, 3));
    const EncodedSeries enc = encode(s, schedule);
    REQUIRE(enc.length() == 3);
    CHECK(enc.channels[0] == ActionVocabulary::channel(Action::IsQuiz));
    CHECK(enc.channels[1] == 11);
    CHECK(enc.values[1] == doctest::Approx(2.0 / 5.0));
    CHECK(enc.channels[2] == 12);
    CHECK(enc.values[2] == doctest::Approx(0.3));
  }

  SUBCASE("submission numbers clamp at 10") {
    StudentTimeSeries s;
    s.student_id = "s1";
    s.interactions.push_back(problem_event(86400.0, Action::IsQuiz, 0, 25));
    const EncodedSeries enc = encode(s, schedule);
    REQUIRE(enc.length() == 3);
    CHECK(enc.values[2] == doctest::Approx(1.0));
  }

  SUBCASE("empty series encodes to length zero") {
    StudentTimeSeries s;
    s.student_id = "s1";
    CHECK(encode(s, schedule).length() == 0);
  }

  SUBCASE("object index outside the schedule range is rejected") {
    StudentTimeSeries s;
    s.student_id = "s1";
    s.interactions.push_back(video_event(86400.0, Action::Play, 99));
    CHECK_THROWS_WITH_AS(encode(s, schedule), doctest::Contains("range"), Error);
  }

  SUBCASE("times are non-decreasing after encoding a sorted stream") {
    StudentTimeSeries s;
    s.student_id = "s1";
    s.interactions.push_back(video_event(1000.0, Action::Load, 1));
    s.interactions.push_back(problem_event(2000.0, Action::IsAssignment, 0, 1));
    s.interactions.push_back(video_event(2000.0, Action::Play, 2));
    const EncodedSeries enc = encode(s, schedule);
    for (size_t i = 1; i < enc.length(); ++i) CHECK(enc.times[i] >= enc.times[i - 1]);
  }
}

namespace {

GeneratedCourse dropout_course(uint64_t seed, double dropout_fraction) {
  GeneratorConfig cfg;
  cfg.n_students = 600;
  cfg.n_weeks = 10;
  cfg.n_videos = 20;
  cfg.n_problems = 10;
  // Low effort drives failing, so sparse legitimate students still carry
  // fail labels and cannot poison the removed set.
  cfg.label_weights = {-50, 0, 0, 0, 0, 0};
  cfg.label_bias = 40.0;
  cfg.early_dropout_fraction = dropout_fraction;
  cfg.seed = seed;
  return generate_course(cfg);
}

}  // namespace

TEST_CASE("filter removes planted dropouts with high fail precision") {
  int total_removed = 0, removed_fail = 0, removed_dropouts = 0, planted = 0;
  for (uint64_t seed : {11ull, 12ull, 13ull, 14ull, 15ull}) {
    const GeneratedCourse course = dropout_course(seed, 0.2);
    const FilterResult result =
        select_filter_operating_point(course.students, course.schedule, {0.99});
    std::set<std::string> dropout_ids;
    for (size_t i = 0; i < course.students.size(); ++i)
      if (course.profiles[i].early_dropout) {
        dropout_ids.insert(course.students[i].student_id);
        ++planted;
      }
    for (const auto& s : result.removed) {
      ++total_removed;
      if (s.label == 1) ++removed_fail;
      if (dropout_ids.count(s.student_id)) ++removed_dropouts;
    }
    CHECK(result.kept.size() + result.removed.size() == course.students.size());
  }
  REQUIRE(total_removed > 0);
  const double precision = static_cast<double>(removed_fail) / total_removed;
  CHECK(precision >= 0.99);
  // The removed set is dominated by the planted archetype, not random fails.
  CHECK(removed_dropouts > planted / 2);
}

TEST_CASE("active pass-heavy cohorts lose nobody to the filter") {
  GeneratorConfig cfg;
  cfg.n_students = 300;
  cfg.n_weeks = 10;
  cfg.n_videos = 20;
  cfg.n_problems = 10;
  cfg.label_bias = -1.0;  // mostly passing
  cfg.seed = 31;
  cfg.overrides.effort = 0.8;
  const GeneratedCourse course = generate_course(cfg);
  const FilterResult result = select_filter_operating_point(course.students, course.schedule);
  CHECK(result.removed.empty());
  CHECK(result.kept.size() == course.students.size());
}

TEST_CASE("a single planted dropout among actives is removed") {
  GeneratorConfig cfg;
  cfg.n_students = 201;
  cfg.n_weeks = 10;
  cfg.n_videos = 20;
  cfg.n_problems = 10;
  cfg.label_weights = {-14, 0, 0, 0, 0, 0};
  cfg.label_bias = 8.0;
  cfg.early_dropout_fraction = 1.0 / 201.0;
  cfg.seed = 17;
  cfg.overrides.effort = 1.0;
  cfg.overrides.consistency = std::array<double, 3>{1.0, 0.0, 0.0};
  const GeneratedCourse course = generate_course(cfg);

  std::string dropout_id;
  for (size_t i = 0; i < course.students.size(); ++i)
    if (course.profiles[i].early_dropout) dropout_id = course.students[i].student_id;
  REQUIRE_FALSE(dropout_id.empty());

  const FilterResult result = select_filter_operating_point(course.students, course.schedule);
  bool removed = false;
  for (const auto& s : result.removed)
    if (s.student_id == dropout_id) removed = true;
  CHECK(removed);
}

TEST_CASE("degenerate input without assignment events warns and keeps all") {
  std::vector<StudentTimeSeries> students;
  for (int i = 0; i < 40; ++i) {
    StudentTimeSeries s;
    s.student_id = "s" + std::to_string(i);
    s.label = i % 2;
    s.interactions.push_back(video_event(86400.0 * (1 + i % 5), Action::Play, i % 10));
    students.push_back(std::move(s));
  }
  const FilterResult result = early_dropout_filter(students, toy_schedule(), 2, 0.99);
  CHECK(result.removed.empty());
  CHECK_FALSE(result.report.warning.empty());
}

TEST_CASE("filtering commutes with truncation beyond the filter window") {
  const GeneratedCourse course = dropout_course(19, 0.15);
  const EarlyLevel level{60.0};  // horizon day 42, filter window week <= 3

  const FilterResult filtered_first =
      select_filter_operating_point(course.students, course.schedule);
  std::vector<StudentTimeSeries> then_truncated;
  for (const auto& s : filtered_first.kept)
    then_truncated.push_back(truncate(s, course.schedule, level));

  std::vector<StudentTimeSeries> truncated;
  for (const auto& s : course.students) truncated.push_back(truncate(s, course.schedule, level));
  const FilterResult truncated_first = select_filter_operating_point(truncated, course.schedule);

  REQUIRE(truncated_first.kept.size() == then_truncated.size());
  for (size_t i = 0; i < then_truncated.size(); ++i) {
    CHECK(truncated_first.kept[i].student_id == then_truncated[i].student_id);
    CHECK(truncated_first.kept[i].interactions.size() == then_truncated[i].interactions.size());
  }
}
