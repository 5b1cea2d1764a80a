#include "coursegraph/metrics.hpp"

#include <map>
#include <sstream>

#include "coursegraph/types.hpp"

namespace coursegraph {

double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || labels.empty())
    throw Error("balanced_accuracy: misaligned or empty inputs");
  int tp = 0, tn = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      predictions[i] == 1 ? ++tp : ++fn;
    else
      predictions[i] == 0 ? ++tn : ++fp;
  }
  if (tp + fn == 0 || tn + fp == 0)
    throw Error("balanced_accuracy: undefined for single-class labels");
  const double tpr = static_cast<double>(tp) / (tp + fn);
  const double tnr = static_cast<double>(tn) / (tn + fp);
  return (tpr + tnr) / 2.0;
}

WeightedAverage weighted_course_average(const std::vector<CourseResult>& results) {
  if (results.empty()) throw Error("weighted_course_average: empty group");
  WeightedAverage avg;
  double num = 0.0;
  for (const auto& r : results) {
    num += r.bac * r.n_students;
    avg.n_students += r.n_students;
    ++avg.n_iterations;
  }
  if (avg.n_students == 0) throw Error("weighted_course_average: zero students");
  avg.bac = num / avg.n_students;
  return avg;
}

std::string reference_ratio(const std::vector<CourseResult>& reference,
                            const std::vector<CourseResult>& baseline) {
  std::map<std::tuple<std::string, int, double>, double> ref;
  for (const auto& r : reference) ref[{r.course_id, r.iteration, r.level}] = r.bac;
  int wins = 0, total = 0;
  for (const auto& b : baseline) {
    auto it = ref.find({b.course_id, b.iteration, b.level});
    if (it == ref.end()) continue;
    ++total;
    if (it->second >= b.bac) ++wins;
  }
  std::ostringstream os;
  os << wins << "/" << total;
  return os.str();
}

std::string comparability_name(Comparability c) {
  switch (c) {
    case Comparability::Better: return "better";
    case Comparability::Comparable: return "comparable";
    default: return "worse";
  }
}

Comparability comparability_flag(double bac_model, double bac_reference) {
  if (bac_model >= bac_reference) return Comparability::Better;
  if (bac_reference <= 0.0) return Comparability::Worse;
  const double decrease = (bac_reference - bac_model) / bac_reference;
  return decrease < 0.05 ? Comparability::Comparable : Comparability::Worse;
}

}  // namespace coursegraph
