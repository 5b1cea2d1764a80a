#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "coursegraph/types.hpp"

namespace coursegraph {

/// Reads an event JSONL file (one event object per row) and groups rows
/// into per-student series sorted by time. Rows are validated against the
/// vocabulary and the schedule horizon; errors name the offending line.
std::vector<StudentTimeSeries> load_clickstream(const std::filesystem::path& path,
                                                const CourseSchedule& schedule);

void save_clickstream(const std::filesystem::path& path,
                      const std::vector<StudentTimeSeries>& students);

CourseSchedule load_schedule(const std::filesystem::path& path);
void save_schedule(const std::filesystem::path& path, const CourseSchedule& schedule);

/// Labels CSV: header "student_id,label", label in {0,1}.
std::map<std::string, int> load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path,
                 const std::vector<StudentTimeSeries>& students);

/// Attaches labels to series in place; throws on missing student ids.
void apply_labels(std::vector<StudentTimeSeries>& students,
                  const std::map<std::string, int>& labels);

}  // namespace coursegraph
