#pragma once

#include <vector>

#include "coursegraph/types.hpp"

namespace coursegraph {

/// Deterministic 80:10:10 partition by student. Fold sizes are floored and
/// the remainder goes to train, then validation, then test. Requires at
/// least 10 students.
DatasetSplit split_students(const std::vector<StudentTimeSeries>& students, uint64_t seed);

}  // namespace coursegraph
