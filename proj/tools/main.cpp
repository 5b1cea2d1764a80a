#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "coursegraph/concepts.hpp"
#include "coursegraph/harness.hpp"
#include "coursegraph/io.hpp"
#include "coursegraph/measures.hpp"
#include "coursegraph/preprocess.hpp"
#include "coursegraph/synthgen.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace coursegraph;

namespace {

ExperimentConfig load_config(const std::string& path, std::optional<uint64_t> seed,
                             bool deterministic) {
  ExperimentConfig cfg = ExperimentConfig::load(path);
  if (seed) {
    cfg.seed = *seed;
    if (cfg.synth) cfg.synth->seed = *seed;
  }
  if (deterministic) cfg.deterministic = true;
  return cfg;
}

int run_generate(const std::string& config_path, std::optional<uint64_t> seed,
                 const std::string& out) {
  ExperimentConfig cfg = load_config(config_path, seed, false);
  if (!cfg.synth)
    throw Error("stage generate: config has no synthgen section");
  fs::create_directories(out);
  GeneratedCourse course = generate_course(*cfg.synth);
  save_schedule(fs::path(out) / "schedule.json", course.schedule);
  save_clickstream(fs::path(out) / "events.jsonl", course.students);
  save_labels(fs::path(out) / "labels.csv", course.students);
  save_profiles(fs::path(out) / "profiles.csv", course);
  std::cout << "generated " << course.students.size() << " students over "
            << course.schedule.n_weeks << " weeks into " << out << "\n";
  return 0;
}

int run_preprocess(const std::string& config_path, std::optional<uint64_t> seed,
                   const std::string& out) {
  ExperimentConfig cfg = load_config(config_path, seed, false);
  LoadedData data = load_experiment_data(cfg);
  FilterResult filter = select_filter_operating_point(data.students, data.schedule);
  fs::create_directories(out);
  std::ofstream report(fs::path(out) / "filter_report.json");
  report << filter.report.to_json() << "\n";
  save_clickstream(fs::path(out) / "kept.jsonl", filter.kept);
  save_clickstream(fs::path(out) / "removed.jsonl", filter.removed);
  std::cout << "kept " << filter.kept.size() << ", removed " << filter.removed.size()
            << " (precision " << filter.report.precision_on_removed << ")\n";
  return 0;
}

int run_train(const std::string& config_path, std::optional<uint64_t> seed,
              const std::string& model, std::optional<double> level,
              const std::string& out) {
  ExperimentConfig cfg = load_config(config_path, seed, false);
  const double e = level ? *level : cfg.levels.front();
  CourseResult r = train_and_evaluate(cfg, model, e, out);
  std::cout << model << " level " << e << ": test BAC " << r.bac << " over "
            << r.n_students << " students\n";
  return 0;
}

int run_evaluate(const std::string& config_path, std::optional<uint64_t> seed,
                 bool deterministic, const std::string& out) {
  ExperimentConfig cfg = load_config(config_path, seed, deterministic);
  ExperimentSummary summary = run_experiment(cfg, out);
  for (const auto& r : summary.results)
    std::cout << r.model << " level " << r.level << ": BAC " << r.bac << "\n";
  return 0;
}

int run_concepts(const std::string& config_path, std::optional<uint64_t> seed,
                 std::optional<double> level, const std::string& out) {
  ExperimentConfig cfg = load_config(config_path, seed, false);
  const double e = level ? *level : 100.0;
  LoadedData data = load_experiment_data(cfg);
  const double horizon = EarlyLevel{e}.horizon_seconds(data.schedule);
  std::vector<MeasureVector> rows;
  for (const auto& s : data.students)
    rows.push_back(compute_measures(s, data.schedule, 0.0, horizon));
  fs::create_directories(out);
  save_measures(fs::path(out) / "measures.csv", rows);
  std::vector<ConceptSubset> subsets;
  for (const auto& spec : pattern_catalogue())
    subsets.push_back(extract_pattern_subset(rows, spec, cfg.concept_min_size));
  save_subsets(fs::path(out) / "subsets.json", subsets);
  int flagged = 0;
  for (const auto& s : subsets) flagged += s.insufficient ? 1 : 0;
  std::cout << subsets.size() << " patterns, " << flagged << " flagged insufficient\n";
  return 0;
}

int run_tcav(const std::string& config_path, std::optional<uint64_t> seed,
             std::optional<double> level, const std::string& out) {
  ExperimentConfig cfg = load_config(config_path, seed, false);
  const double e = level ? *level : cfg.levels.front();
  run_tcav_for_level(cfg, out, e);
  std::cout << "tcav artifacts written under " << out << "\n";
  return 0;
}

int run_report(const std::string& out) {
  emit_report(out);
  std::cout << "report written under " << (fs::path(out) / "report").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clickstream pass/fail prediction and concept analysis"};
  app.require_subcommand(1);

  std::string config_path, out = "artifacts", model = "graph";
  std::optional<uint64_t> seed;
  std::optional<double> level;
  bool deterministic = false;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    auto* c = cmd->add_option("--config", config_path, "Experiment config JSON");
    if (needs_config) c->required();
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--out", out, "Artifact directory");
    return cmd;
  };

  auto* generate = add_common(app.add_subcommand("generate", "Generate a synthetic course"), true);
  auto* preprocess = add_common(
      app.add_subcommand("preprocess", "Run the early-dropout filter"), true);
  auto* train = add_common(app.add_subcommand("train", "Train one model at one level"), true);
  train->add_option("--model", model, "graph, bilstm, or transformer");
  train->add_option("--level", level, "Early prediction level (0, 100]");
  auto* evaluate = add_common(app.add_subcommand("evaluate", "Run the full experiment"), true);
  evaluate->add_flag("--deterministic", deterministic, "Serialize all work for bit-stable output");
  auto* concepts = add_common(
      app.add_subcommand("concepts", "Extract behavioral concept subsets"), true);
  concepts->add_option("--level", level, "Early prediction level (0, 100]");
  auto* tcav = add_common(app.add_subcommand("tcav", "Score concepts on a trained model"), true);
  tcav->add_option("--level", level, "Early prediction level (0, 100]");
  auto* report = add_common(app.add_subcommand("report", "Render tables and plots"), false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return run_generate(config_path, seed, out);
    if (preprocess->parsed()) return run_preprocess(config_path, seed, out);
    if (train->parsed()) return run_train(config_path, seed, model, level, out);
    if (evaluate->parsed()) return run_evaluate(config_path, seed, deterministic, out);
    if (concepts->parsed()) return run_concepts(config_path, seed, level, out);
    if (tcav->parsed()) return run_tcav(config_path, seed, level, out);
    if (report->parsed()) return run_report(out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
