#include "coursegraph/io.hpp"

#include <fstream>
#include <map>

#include "json.hpp"

namespace coursegraph {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path.string());
  return out;
}

std::optional<int> opt_int(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<int>();
}

}  // namespace

std::vector<StudentTimeSeries> load_clickstream(const std::filesystem::path& path,
                                                const CourseSchedule& schedule) {
  auto in = open_in(path);
  std::map<std::string, StudentTimeSeries> by_student;
  const double course_end = schedule.duration_seconds();

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error("line " + std::to_string(line_no) + ": JSON parse error: " + e.what());
    }
    Interaction ev;
    std::string student_id;
    try {
      student_id = row.at("student_id").get<std::string>();
      ev.t = row.at("t").get<double>();
      const auto action_name = row.at("action").get<std::string>();
      auto action = ActionVocabulary::try_parse(action_name);
      if (!action)
        throw Error("line " + std::to_string(line_no) + ": unknown action '" + action_name + "'");
      ev.action = *action;
      ev.object_id = row.at("object_id").get<std::string>();
      ev.video_id = opt_int(row, "video_id");
      ev.problem_id = opt_int(row, "problem_id");
      ev.submission_num = opt_int(row, "submission_num");
    } catch (const json::exception& e) {
      throw Error("line " + std::to_string(line_no) + ": malformed event row: " + e.what());
    }
    if (ev.t < 0.0 || ev.t > course_end)
      throw Error("line " + std::to_string(line_no) + ": timestamp outside [0, course end]");
    try {
      ev.validate();
    } catch (const Error& e) {
      throw Error("line " + std::to_string(line_no) + ": " + e.what());
    }
    auto& series = by_student[student_id];
    series.student_id = student_id;
    series.interactions.push_back(std::move(ev));
  }

  std::vector<StudentTimeSeries> out;
  out.reserve(by_student.size());
  for (auto& [_, series] : by_student) {
    series.sort_by_time();
    out.push_back(std::move(series));
  }
  return out;
}

void save_clickstream(const std::filesystem::path& path,
                      const std::vector<StudentTimeSeries>& students) {
  auto out = open_out(path);
  for (const auto& s : students) {
    for (const auto& ev : s.interactions) {
      json row{{"student_id", s.student_id},
               {"t", ev.t},
               {"action", ActionVocabulary::name(ev.action)},
               {"object_id", ev.object_id},
               {"video_id", ev.video_id ? json(*ev.video_id) : json(nullptr)},
               {"problem_id", ev.problem_id ? json(*ev.problem_id) : json(nullptr)},
               {"submission_num", ev.submission_num ? json(*ev.submission_num) : json(nullptr)}};
      out << row.dump() << "\n";
    }
  }
}

CourseSchedule load_schedule(const std::filesystem::path& path) {
  auto in = open_in(path);
  json j;
  in >> j;
  CourseSchedule s;
  s.course_id = j.at("course_id").get<std::string>();
  s.iteration = j.at("iteration").get<int>();
  s.n_weeks = j.at("n_weeks").get<int>();
  s.passing_semantics = j.value("passing_semantics", std::string{});
  for (const auto& jo : j.at("objects")) {
    ScheduleObject o;
    o.object_id = jo.at("object_id").get<std::string>();
    const auto kind = jo.at("kind").get<std::string>();
    if (kind == "video")
      o.kind = ObjectKind::Video;
    else if (kind == "problem")
      o.kind = ObjectKind::Problem;
    else
      throw Error("schedule: unknown object kind '" + kind + "'");
    o.release_week = jo.at("release_week").get<int>();
    o.deadline_week = jo.value("deadline_week", o.release_week);
    o.duration_seconds = jo.value("duration_seconds", 0.0);
    o.is_graded = jo.value("is_graded", false);
    s.objects.push_back(std::move(o));
  }
  s.validate();
  return s;
}

void save_schedule(const std::filesystem::path& path, const CourseSchedule& schedule) {
  json j{{"course_id", schedule.course_id},
         {"iteration", schedule.iteration},
         {"n_weeks", schedule.n_weeks},
         {"passing_semantics", schedule.passing_semantics}};
  j["objects"] = json::array();
  for (const auto& o : schedule.objects) {
    json jo{{"object_id", o.object_id},
            {"kind", o.kind == ObjectKind::Video ? "video" : "problem"},
            {"release_week", o.release_week},
            {"is_graded", o.is_graded}};
    if (o.kind == ObjectKind::Problem) jo["deadline_week"] = o.deadline_week;
    if (o.kind == ObjectKind::Video) jo["duration_seconds"] = o.duration_seconds;
    j["objects"].push_back(std::move(jo));
  }
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

std::map<std::string, int> load_labels(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::map<std::string, int> labels;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("student_id", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw Error("labels line " + std::to_string(line_no) + ": expected 'student_id,label'");
    const auto id = line.substr(0, comma);
    const auto value = line.substr(comma + 1);
    if (value != "0" && value != "1")
      throw Error("labels line " + std::to_string(line_no) + ": label must be 0 or 1");
    labels[id] = value == "1" ? 1 : 0;
  }
  return labels;
}

void save_labels(const std::filesystem::path& path,
                 const std::vector<StudentTimeSeries>& students) {
  auto out = open_out(path);
  out << "student_id,label\n";
  for (const auto& s : students) out << s.student_id << "," << s.label << "\n";
}

void apply_labels(std::vector<StudentTimeSeries>& students,
                  const std::map<std::string, int>& labels) {
  for (auto& s : students) {
    auto it = labels.find(s.student_id);
    if (it == labels.end()) throw Error("no label for student '" + s.student_id + "'");
    s.label = it->second;
  }
}

}  // namespace coursegraph
