#include "coursegraph/split.hpp"

#include <algorithm>
#include <random>

namespace coursegraph {

DatasetSplit split_students(const std::vector<StudentTimeSeries>& students, uint64_t seed) {
  const size_t n = students.size();
  if (n < 10) throw Error("split_students: need at least 10 students, got " + std::to_string(n));

  std::vector<std::string> ids;
  ids.reserve(n);
  for (const auto& s : students) ids.push_back(s.student_id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  size_t n_train = n * 8 / 10;
  size_t n_val = n / 10;
  size_t n_test = n / 10;
  size_t remainder = n - n_train - n_val - n_test;
  // Remainder students go to train, then validation, then test.
  if (remainder > 0) { ++n_train; --remainder; }
  if (remainder > 0) { ++n_val; --remainder; }
  if (remainder > 0) { ++n_test; --remainder; }

  DatasetSplit split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.validation.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test.assign(ids.begin() + n_train + n_val, ids.end());
  return split;
}

}  // namespace coursegraph
