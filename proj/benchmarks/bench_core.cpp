#include <benchmark/benchmark.h>

#include "coursegraph/graph_model.hpp"
#include "coursegraph/measures.hpp"
#include "coursegraph/preprocess.hpp"
#include "coursegraph/synthgen.hpp"

namespace {

using namespace coursegraph;

// Shared fixture data; generated once so individual benchmarks time only the
// stage under test.
const GeneratedCourse& course() {
  static const GeneratedCourse c = [] {
    GeneratorConfig cfg;
    cfg.n_students = 200;
    cfg.n_weeks = 10;
    cfg.n_videos = 30;
    cfg.n_problems = 20;
    cfg.seed = 7;
    return generate_course(cfg);
  }();
  return c;
}

void BM_GenerateCourse(benchmark::State& state) {
  GeneratorConfig cfg;
  cfg.n_students = static_cast<int>(state.range(0));
  cfg.n_weeks = 10;
  cfg.n_videos = 30;
  cfg.n_problems = 20;
  cfg.seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_course(cfg));
  }
  state.SetItemsProcessed(state.iterations() * cfg.n_students);
}
BENCHMARK(BM_GenerateCourse)->Arg(50)->Arg(200);

void BM_ComputeMeasures(benchmark::State& state) {
  const auto& c = course();
  const double horizon = EarlyLevel{60.0}.horizon_seconds(c.schedule);
  size_t i = 0;
  for (auto _ : state) {
    const auto& s = c.students[i++ % c.students.size()];
    benchmark::DoNotOptimize(compute_measures(s, c.schedule, 0.0, horizon));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ComputeMeasures);

void BM_Encode(benchmark::State& state) {
  const auto& c = course();
  std::vector<StudentTimeSeries> truncated;
  for (const auto& s : c.students)
    truncated.push_back(truncate(s, c.schedule, EarlyLevel{60.0}));
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode(truncated[i++ % truncated.size()], c.schedule));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Encode);

void BM_GraphForward(benchmark::State& state) {
  const auto& c = course();
  std::vector<EncodedSeries> encoded;
  for (const auto& s : c.students)
    encoded.push_back(encode(truncate(s, c.schedule, EarlyLevel{60.0}), c.schedule));
  GraphModelConfig cfg;
  cfg.d_h = static_cast<int>(state.range(0));
  cfg.d_z = static_cast<int>(state.range(0));
  cfg.d_f = static_cast<int>(2 * state.range(0));
  cfg.seed = 11;
  const GraphModel model(cfg);
  size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(encoded[i++ % encoded.size()]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_GraphForward)->Arg(16)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
