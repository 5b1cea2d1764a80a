#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "coursegraph/measures.hpp"

namespace coursegraph {

/// Named cohort of students instantiating one behavioral pattern.
struct ConceptSubset {
  std::string name;  // "dimension/pattern"
  std::set<std::string> student_ids;
  int threshold_used = 5;  // percent
  std::vector<Measure> measures_used;
  bool insufficient = false;  // could not reach the 100-student floor
};

enum class TailDirection { Top, Bottom, Middle };

/// One measure with the tail that instantiates the pattern.
struct MeasureDirection {
  Measure measure;
  TailDirection direction;
};

struct PatternSpec {
  Dimension dimension;
  std::string pattern;  // e.g. "higher", "uniform", "anticipated"
  std::vector<MeasureDirection> measures;

  std::string name() const { return dimension_name(dimension) + "/" + pattern; }
};

/// The full pattern catalogue: higher/lower intensity for effort, control,
/// assessment and regularity (higher/lower peaks), uniform / first-half /
/// second-half consistency, anticipated/delayed proactivity.
const std::vector<PatternSpec>& pattern_catalogue();

/// Greedy threshold protocol: start at t = 5%, take each measure's tail,
/// intersect across the dimension's measures, and grow t by 1 until the
/// subset has at least `min_size` students. Tail ties are included.
ConceptSubset extract_pattern_subset(const std::vector<MeasureVector>& measures,
                                     const PatternSpec& spec, int min_size = 100);

/// k independent seeded subsets of `size` students drawn without
/// replacement within each subset.
std::vector<ConceptSubset> build_random_subsets(const std::vector<std::string>& population,
                                                int k, int size, uint64_t seed);

void save_subsets(const std::filesystem::path& path, const std::vector<ConceptSubset>& subsets);
std::vector<ConceptSubset> load_subsets(const std::filesystem::path& path);

}  // namespace coursegraph
