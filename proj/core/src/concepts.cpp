#include "coursegraph/concepts.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "json.hpp"

namespace coursegraph {

const std::vector<PatternSpec>& pattern_catalogue() {
  using D = TailDirection;
  static const std::vector<PatternSpec> kCatalogue = {
      {Dimension::Effort, "higher",
       {{kTotalTimeOnline, D::Top}, {kTotalVideoClicks, D::Top}}},
      {Dimension::Effort, "lower",
       {{kTotalTimeOnline, D::Bottom}, {kTotalVideoClicks, D::Bottom}}},
      {Dimension::Consistency, "uniform",
       {{kRelativeTimeOnline, D::Middle}, {kRelativeVideoClicks, D::Middle}}},
      {Dimension::Consistency, "first_half",
       {{kRelativeTimeOnline, D::Top}, {kRelativeVideoClicks, D::Top}}},
      {Dimension::Consistency, "second_half",
       {{kRelativeTimeOnline, D::Bottom}, {kRelativeVideoClicks, D::Bottom}}},
      {Dimension::Regularity, "higher",
       {{kPeriodicityWeekDay, D::Top},
        {kPeriodicityWeekHour, D::Top},
        {kPeriodicityDayHour, D::Top}}},
      {Dimension::Regularity, "lower",
       {{kPeriodicityWeekDay, D::Bottom},
        {kPeriodicityWeekHour, D::Bottom},
        {kPeriodicityDayHour, D::Bottom}}},
      {Dimension::Proactivity, "anticipated",
       {{kContentAnticipation, D::Top}, {kDelayLectureView, D::Bottom}}},
      {Dimension::Proactivity, "delayed",
       {{kContentAnticipation, D::Bottom}, {kDelayLectureView, D::Top}}},
      {Dimension::Control, "higher",
       {{kFracTimeVideo, D::Top}, {kPauseFrequency, D::Top}, {kAvgChangeRate, D::Top}}},
      {Dimension::Control, "lower",
       {{kFracTimeVideo, D::Bottom},
        {kPauseFrequency, D::Bottom},
        {kAvgChangeRate, D::Bottom}}},
      {Dimension::Assessment, "higher",
       {{kCompetencyStrength, D::Top}, {kStudentShape, D::Top}}},
      {Dimension::Assessment, "lower",
       {{kCompetencyStrength, D::Bottom}, {kStudentShape, D::Bottom}}},
  };
  return kCatalogue;
}

namespace {

// Value at the given percentile of the sorted sample (nearest-rank).
double percentile(const std::vector<double>& sorted, double pct) {
  if (sorted.empty()) return 0.0;
  const double clamped = std::clamp(pct, 0.0, 100.0);
  auto rank = static_cast<size_t>(std::ceil(clamped / 100.0 * sorted.size()));
  if (rank > 0) --rank;
  return sorted[std::min(rank, sorted.size() - 1)];
}

std::set<std::string> tail_members(const std::vector<MeasureVector>& population,
                                   Measure measure, TailDirection dir, int t) {
  std::vector<double> values;
  values.reserve(population.size());
  for (const auto& mv : population) values.push_back(mv.values[measure]);
  std::sort(values.begin(), values.end());

  std::set<std::string> out;
  // Closed thresholds: boundary ties are included in the tail.
  if (dir == TailDirection::Top) {
    // First value of the top t% under nearest-rank, so a tie-free top tail
    // holds exactly ceil(t% * n) students.
    const auto tail_n = static_cast<size_t>(
        std::ceil(std::clamp(static_cast<double>(t), 0.0, 100.0) / 100.0 * values.size()));
    const double cut =
        tail_n == 0 ? values.back() : values[values.size() - std::min(tail_n, values.size())];
    for (const auto& mv : population)
      if (mv.values[measure] >= cut) out.insert(mv.student_id);
  } else if (dir == TailDirection::Bottom) {
    const double cut = percentile(values, static_cast<double>(t));
    for (const auto& mv : population)
      if (mv.values[measure] <= cut) out.insert(mv.student_id);
  } else {
    // Middle band spans the 40th-60th percentile at the starting t = 5.
    const double lo = percentile(values, 50.0 - 2.0 * t);
    const double hi = percentile(values, 50.0 + 2.0 * t);
    for (const auto& mv : population)
      if (mv.values[measure] >= lo && mv.values[measure] <= hi) out.insert(mv.student_id);
  }
  return out;
}

}  // namespace

ConceptSubset extract_pattern_subset(const std::vector<MeasureVector>& measures,
                                     const PatternSpec& spec, int min_size) {
  std::vector<MeasureVector> population;
  for (const auto& mv : measures)
    if (!mv.empty) population.push_back(mv);

  ConceptSubset subset;
  subset.name = spec.name();
  for (const auto& md : spec.measures) subset.measures_used.push_back(md.measure);

  if (population.size() < static_cast<size_t>(min_size)) {
    subset.insufficient = true;
    for (const auto& mv : population) subset.student_ids.insert(mv.student_id);
    subset.threshold_used = 100;
    return subset;
  }

  for (int t = 5; t <= 100; ++t) {
    std::set<std::string> intersection;
    bool first = true;
    for (const auto& md : spec.measures) {
      auto tail = tail_members(population, md.measure, md.direction, t);
      if (first) {
        intersection = std::move(tail);
        first = false;
      } else {
        std::set<std::string> next;
        std::set_intersection(intersection.begin(), intersection.end(), tail.begin(),
                              tail.end(), std::inserter(next, next.begin()));
        intersection = std::move(next);
      }
    }
    subset.threshold_used = t;
    subset.student_ids = std::move(intersection);
    if (subset.student_ids.size() >= static_cast<size_t>(min_size)) return subset;
  }
  subset.insufficient = true;
  return subset;
}

std::vector<ConceptSubset> build_random_subsets(const std::vector<std::string>& population,
                                                int k, int size, uint64_t seed) {
  if (population.size() < static_cast<size_t>(size))
    throw Error("build_random_subsets: population smaller than requested subset size");
  std::vector<std::string> pool(population);
  std::sort(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  std::vector<ConceptSubset> out;
  for (int i = 0; i < k; ++i) {
    std::vector<std::string> shuffled(pool);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ConceptSubset s;
    s.name = "random/" + std::to_string(i);
    s.threshold_used = 0;
    s.student_ids.insert(shuffled.begin(), shuffled.begin() + size);
    out.push_back(std::move(s));
  }
  return out;
}

void save_subsets(const std::filesystem::path& path,
                  const std::vector<ConceptSubset>& subsets) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : subsets) {
    nlohmann::json js{{"name", s.name},
                      {"t", s.threshold_used},
                      {"insufficient", s.insufficient},
                      {"student_ids", std::vector<std::string>(s.student_ids.begin(),
                                                               s.student_ids.end())}};
    std::vector<std::string> names;
    for (auto m : s.measures_used) names.push_back(measure_names()[m]);
    js["measures_used"] = names;
    j.push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<ConceptSubset> load_subsets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path.string());
  nlohmann::json j;
  in >> j;
  std::vector<ConceptSubset> out;
  for (const auto& js : j) {
    ConceptSubset s;
    s.name = js.at("name").get<std::string>();
    s.threshold_used = js.at("t").get<int>();
    s.insufficient = js.at("insufficient").get<bool>();
    for (const auto& id : js.at("student_ids")) s.student_ids.insert(id.get<std::string>());
    for (const auto& mn : js.value("measures_used", std::vector<std::string>{})) {
      const auto& names = measure_names();
      for (int m = 0; m < kNumMeasures; ++m)
        if (names[m] == mn) s.measures_used.push_back(static_cast<Measure>(m));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace coursegraph
