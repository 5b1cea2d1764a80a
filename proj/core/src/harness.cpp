#include "coursegraph/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "coursegraph/baselines.hpp"
#include "coursegraph/concepts.hpp"
#include "coursegraph/io.hpp"
#include "coursegraph/measures.hpp"
#include "coursegraph/preprocess.hpp"
#include "coursegraph/split.hpp"
#include "coursegraph/svgplot.hpp"
#include "coursegraph/tcav.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace coursegraph {

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t mix_seed(uint64_t a, uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
  return a;
}

std::string level_tag(double e) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "level_%g", e);
  return buf;
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path.string());
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing artifact: " + path.string());
  json j;
  in >> j;
  return j;
}

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw Error("stage " + name + ": " + e.what());
  }
}

json generator_to_json(const GeneratorConfig& g) {
  json j{{"n_students", g.n_students},
         {"n_weeks", g.n_weeks},
         {"n_videos", g.n_videos},
         {"n_problems", g.n_problems},
         {"label_weights", g.label_weights},
         {"label_bias", g.label_bias},
         {"early_dropout_fraction", g.early_dropout_fraction},
         {"seed", g.seed}};
  json ov = json::object();
  if (g.overrides.effort) ov["effort"] = *g.overrides.effort;
  if (g.overrides.consistency) ov["consistency"] = *g.overrides.consistency;
  if (g.overrides.regularity) ov["regularity"] = *g.overrides.regularity;
  if (g.overrides.proactivity) ov["proactivity"] = *g.overrides.proactivity;
  if (g.overrides.control) ov["control"] = *g.overrides.control;
  if (g.overrides.assessment) ov["assessment"] = *g.overrides.assessment;
  if (!ov.empty()) j["overrides"] = ov;
  return j;
}

GeneratorConfig generator_from_json(const json& j) {
  GeneratorConfig g;
  g.n_students = j.value("n_students", g.n_students);
  g.n_weeks = j.value("n_weeks", g.n_weeks);
  g.n_videos = j.value("n_videos", g.n_videos);
  g.n_problems = j.value("n_problems", g.n_problems);
  if (j.contains("label_weights")) g.label_weights = j.at("label_weights");
  g.label_bias = j.value("label_bias", g.label_bias);
  g.early_dropout_fraction = j.value("early_dropout_fraction", g.early_dropout_fraction);
  g.seed = j.value("seed", g.seed);
  if (j.contains("overrides")) {
    const json& ov = j.at("overrides");
    if (ov.contains("effort")) g.overrides.effort = ov.at("effort").get<double>();
    if (ov.contains("consistency"))
      g.overrides.consistency = ov.at("consistency").get<std::array<double, 3>>();
    if (ov.contains("regularity")) g.overrides.regularity = ov.at("regularity").get<double>();
    if (ov.contains("proactivity"))
      g.overrides.proactivity = ov.at("proactivity").get<double>();
    if (ov.contains("control")) g.overrides.control = ov.at("control").get<double>();
    if (ov.contains("assessment")) g.overrides.assessment = ov.at("assessment").get<double>();
  }
  return g;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (models.empty()) throw Error("experiment config: at least one model required");
  for (double e : levels)
    if (!(e > 0.0 && e <= 100.0))
      throw Error("experiment config: levels must lie in (0, 100]");
  for (const auto& m : models)
    if (m != "graph" && m != "bilstm" && m != "transformer")
      throw Error("experiment config: unknown model " + m);
  if (tcav_runs < 1) throw Error("experiment config: tcav_runs must be positive");
  if (synth) {
    synth->validate();
  } else if (events_path.empty() || schedule_path.empty() || labels_path.empty()) {
    throw Error("experiment config: either synthgen settings or data paths required");
  }
}

std::string ExperimentConfig::to_json() const {
  json j;
  if (synth) j["synthgen"] = generator_to_json(*synth);
  if (!events_path.empty()) j["events"] = events_path.string();
  if (!schedule_path.empty()) j["schedule"] = schedule_path.string();
  if (!labels_path.empty()) j["labels"] = labels_path.string();
  j["levels"] = levels;
  j["models"] = models;
  if (!grids.empty()) j["grids"] = grids;
  j["train"] = {{"batch_size", train.batch_size},
                {"learning_rate", train.learning_rate},
                {"max_epochs", train.max_epochs},
                {"patience", train.patience}};
  j["tcav_runs"] = tcav_runs;
  j["concept_min_size"] = concept_min_size;
  j["random_cohort_size"] = random_cohort_size;
  j["seed"] = seed;
  j["reference_model"] = reference_model;
  j["deterministic"] = deterministic;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig c;
  if (j.contains("synthgen")) c.synth = generator_from_json(j.at("synthgen"));
  if (j.contains("events")) c.events_path = j.at("events").get<std::string>();
  if (j.contains("schedule")) c.schedule_path = j.at("schedule").get<std::string>();
  if (j.contains("labels")) c.labels_path = j.at("labels").get<std::string>();
  if (j.contains("levels")) c.levels = j.at("levels").get<std::vector<double>>();
  if (j.contains("models")) c.models = j.at("models").get<std::vector<std::string>>();
  if (j.contains("grids"))
    c.grids = j.at("grids").get<std::map<std::string, std::vector<GridPoint>>>();
  if (j.contains("train")) {
    const json& t = j.at("train");
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
    c.train.patience = t.value("patience", c.train.patience);
  }
  c.tcav_runs = j.value("tcav_runs", c.tcav_runs);
  c.concept_min_size = j.value("concept_min_size", c.concept_min_size);
  c.random_cohort_size = j.value("random_cohort_size", c.random_cohort_size);
  c.seed = j.value("seed", c.seed);
  c.reference_model = j.value("reference_model", c.reference_model);
  c.deterministic = j.value("deterministic", c.deterministic);
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

uint64_t ExperimentConfig::config_hash() const { return fnv1a(to_json()); }

const std::map<std::string, std::vector<GridPoint>>& default_grids() {
  static const std::map<std::string, std::vector<GridPoint>> kGrids = {
      {"graph", {{{"d_h", 16}, {"d_z", 16}, {"d_f", 32}},
                 {{"d_h", 32}, {"d_z", 32}, {"d_f", 64}}}},
      {"bilstm", {{{"hidden", 16}}, {{"hidden", 32}}}},
      {"transformer", {{{"hidden", 16}}, {{"hidden", 32}}}},
  };
  return kGrids;
}

void save_results(const fs::path& path, const std::vector<CourseResult>& results) {
  json j = json::array();
  for (const auto& r : results) {
    j.push_back({{"course_id", r.course_id},
                 {"iteration", r.iteration},
                 {"model", r.model},
                 {"level", r.level},
                 {"bac", r.bac},
                 {"n_students", r.n_students},
                 {"student_ids", r.student_ids},
                 {"predictions", r.predictions},
                 {"labels", r.labels}});
  }
  write_text(path, j.dump(2) + "\n");
}

std::vector<CourseResult> load_results(const fs::path& path) {
  json j = read_json_file(path);
  std::vector<CourseResult> out;
  for (const auto& jr : j) {
    CourseResult r;
    r.course_id = jr.at("course_id").get<std::string>();
    r.iteration = jr.at("iteration").get<int>();
    r.model = jr.at("model").get<std::string>();
    r.level = jr.at("level").get<double>();
    r.bac = jr.at("bac").get<double>();
    r.n_students = jr.at("n_students").get<int>();
    r.student_ids = jr.at("student_ids").get<std::vector<std::string>>();
    r.predictions = jr.at("predictions").get<std::vector<int>>();
    r.labels = jr.at("labels").get<std::vector<int>>();
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

struct LevelData {
  std::map<std::string, EncodedSeries> encoded;       // per kept student
  std::map<std::string, Eigen::MatrixXd> features;    // weekly rows
  std::map<std::string, int> labels;
};

std::vector<EncodedSeries> pick_encoded(const LevelData& data,
                                        const std::vector<std::string>& ids) {
  std::vector<EncodedSeries> out;
  for (const auto& id : ids) out.push_back(data.encoded.at(id));
  return out;
}

std::vector<FeatureSample> pick_features(const LevelData& data,
                                         const std::vector<std::string>& ids) {
  std::vector<FeatureSample> out;
  for (const auto& id : ids)
    out.push_back({id, data.features.at(id), data.labels.at(id)});
  return out;
}

void apply_graph_overrides(GraphModelConfig& c, const GridPoint& p) {
  for (const auto& [k, v] : p) {
    if (k == "d_h") c.d_h = static_cast<int>(v);
    else if (k == "d_t") c.d_t = static_cast<int>(v);
    else if (k == "d_z") c.d_z = static_cast<int>(v);
    else if (k == "d_f") c.d_f = static_cast<int>(v);
    else if (k == "max_observations") c.max_observations = static_cast<int>(v);
    else throw Error("unknown graph hyperparameter: " + k);
  }
}

void apply_baseline_overrides(BaselineConfig& c, const GridPoint& p) {
  for (const auto& [k, v] : p) {
    if (k == "hidden") c.hidden = static_cast<int>(v);
    else if (k == "layers") c.layers = static_cast<int>(v);
    else if (k == "heads") c.heads = static_cast<int>(v);
    else if (k == "d_f") c.d_f = static_cast<int>(v);
    else if (k == "d_t") c.d_t = static_cast<int>(v);
    else if (k == "max_tokens") c.max_tokens = static_cast<int>(v);
    else throw Error("unknown baseline hyperparameter: " + k);
  }
}

struct TrainedModel {
  std::string name;
  int best_point = 0;
  double best_val_bac = 0.0;
  TrainingReport report;
  std::optional<GraphModel> graph;
  std::optional<BiLstmModel> bilstm;
  std::optional<TransformerModel> transformer;
};

TrainedModel grid_search(const std::string& model_name, const ExperimentConfig& cfg,
                         const LevelData& data, const DatasetSplit& split,
                         double level, const fs::path& model_dir) {
  const auto& grid = cfg.grids.count(model_name) ? cfg.grids.at(model_name)
                                                 : default_grids().at(model_name);
  TrainedModel best;
  best.name = model_name;
  best.best_val_bac = -1.0;
  json grid_log = json::array();

  for (size_t i = 0; i < grid.size(); ++i) {
    TrainConfig tc = cfg.train;
    tc.seed = mix_seed(cfg.seed, fnv1a(model_name) + i);
    const uint64_t init_seed = mix_seed(tc.seed, static_cast<uint64_t>(level * 100));
    TrainingReport report;
    if (model_name == "graph") {
      GraphModelConfig gmc;
      apply_graph_overrides(gmc, grid[i]);
      gmc.seed = init_seed;
      GraphModel model(gmc);
      report = model.train(pick_encoded(data, split.train), pick_encoded(data, split.validation), tc);
      if (report.best_val_bac > best.best_val_bac) {
        best.best_val_bac = report.best_val_bac;
        best.best_point = static_cast<int>(i);
        best.report = report;
        best.graph = std::move(model);
      }
    } else if (model_name == "bilstm") {
      BaselineConfig bc;
      bc.kind = BaselineKind::BiLstmFeatures;
      apply_baseline_overrides(bc, grid[i]);
      bc.seed = init_seed;
      BiLstmModel model(bc, kNumMeasures);
      report = model.train(pick_features(data, split.train), pick_features(data, split.validation), tc);
      if (report.best_val_bac > best.best_val_bac) {
        best.best_val_bac = report.best_val_bac;
        best.best_point = static_cast<int>(i);
        best.report = report;
        best.bilstm = std::move(model);
      }
    } else {
      BaselineConfig bc;
      bc.kind = BaselineKind::TransformerRaw;
      apply_baseline_overrides(bc, grid[i]);
      bc.seed = init_seed;
      TransformerModel model(bc);
      report = model.train(pick_encoded(data, split.train), pick_encoded(data, split.validation), tc);
      if (report.best_val_bac > best.best_val_bac) {
        best.best_val_bac = report.best_val_bac;
        best.best_point = static_cast<int>(i);
        best.report = report;
        best.transformer = std::move(model);
      }
    }
    grid_log.push_back({{"point", grid[i]}, {"val_bac", report.best_val_bac}});
  }

  fs::create_directories(model_dir);
  write_text(model_dir / "grid.json",
             json{{"points", grid_log}, {"best_point", best.best_point}}.dump(2) + "\n");
  write_text(model_dir / "train_report.json", best.report.to_json() + "\n");
  if (best.graph) best.graph->save(model_dir / "checkpoint.json");
  if (best.bilstm) best.bilstm->save(model_dir / "checkpoint.json");
  if (best.transformer) best.transformer->save(model_dir / "checkpoint.json");
  return best;
}

Prediction predict_with(const TrainedModel& m, const LevelData& data, const std::string& id) {
  if (m.graph) return m.graph->predict(data.encoded.at(id));
  if (m.bilstm) return m.bilstm->predict(data.features.at(id));
  return m.transformer->predict(data.encoded.at(id));
}

json tcav_result_json(const TcavResult& r, const std::string& extra_key = "",
                      const std::string& extra_val = "") {
  double rm = 0.0, rs = 0.0;
  if (!r.random_scores.empty()) {
    for (double v : r.random_scores) rm += v;
    rm /= r.random_scores.size();
    for (double v : r.random_scores) rs += (v - rm) * (v - rm);
    rs = std::sqrt(rs / std::max<size_t>(r.random_scores.size() - 1, 1));
  }
  json j{{"concept", r.concept_name}, {"class", r.cls},
         {"score", r.score},          {"layer_scores", r.layer_scores},
         {"random_mean", rm},         {"random_std", rs},
         {"p_value", r.p_value},      {"n_students", r.n_students},
         {"absent", r.absent}};
  if (!extra_key.empty()) j[extra_key] = extra_val;
  return j;
}

// Draws `size` ids from population excluding `taken`, seeded.
ConceptSubset draw_random_cohort(const std::vector<std::string>& population,
                                 const std::set<std::string>& taken, int size,
                                 uint64_t seed, const std::string& name) {
  std::vector<std::string> pool;
  for (const auto& id : population)
    if (!taken.count(id)) pool.push_back(id);
  if (pool.size() < static_cast<size_t>(size))
    throw Error("tcav: population too small for a disjoint random cohort");
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  ConceptSubset s;
  s.name = name;
  s.threshold_used = 0;
  s.student_ids.insert(pool.begin(), pool.begin() + size);
  return s;
}

void run_tcav_suite(const ExperimentConfig& cfg, const GraphModel& model,
                    const LevelData& data, const DatasetSplit& split,
                    const std::vector<ConceptSubset>& subsets, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::string> population;
  std::vector<EncodedSeries> all_encoded;
  for (const auto& [id, enc] : data.encoded) {
    population.push_back(id);
    all_encoded.push_back(enc);
  }
  const ActivationStore store = build_activation_store(model, all_encoded);

  std::set<std::string> by_class[2];
  for (const auto& id : population) by_class[data.labels.at(id)].insert(id);

  // Random-vs-random CAVs shared across concepts.
  std::vector<Cav> random_cavs;
  for (int r = 0; r < cfg.tcav_runs; ++r) {
    std::vector<std::string> pool(population);
    std::mt19937_64 rng(mix_seed(cfg.seed, 0xabcdef00ULL + r));
    std::shuffle(pool.begin(), pool.end(), rng);
    if (pool.size() < 2 * static_cast<size_t>(cfg.random_cohort_size))
      throw Error("tcav: population too small for disjoint random cohort pairs");
    ConceptSubset a, b;
    a.name = "random_a";
    b.name = "random_b";
    a.student_ids.insert(pool.begin(), pool.begin() + cfg.random_cohort_size);
    b.student_ids.insert(pool.begin() + cfg.random_cohort_size,
                         pool.begin() + 2 * cfg.random_cohort_size);
    for (int l = 0; l < kNumTraceLayers; ++l) {
      Cav cav = fit_cav(a, b, store, static_cast<TraceLayer>(l),
                        mix_seed(cfg.seed, 7000 + r * 2 + l), cfg.random_cohort_size);
      cav.random_run = r;
      random_cavs.push_back(std::move(cav));
    }
  }

  std::map<std::string, std::vector<Cav>> concept_cavs;
  for (size_t p = 0; p < subsets.size(); ++p) {
    const auto& subset = subsets[p];
    if (subset.insufficient) continue;
    auto& cavs = concept_cavs[subset.name];
    for (int r = 0; r < cfg.tcav_runs; ++r) {
      ConceptSubset rand_cohort = draw_random_cohort(
          population, subset.student_ids, cfg.random_cohort_size,
          mix_seed(cfg.seed, (p + 1) * 100003ULL + r), "random_for_" + subset.name);
      for (int l = 0; l < kNumTraceLayers; ++l) {
        Cav cav = fit_cav(subset, rand_cohort, store, static_cast<TraceLayer>(l),
                          mix_seed(cfg.seed, (p + 1) * 900007ULL + r * 2 + l),
                          std::min<int>(cfg.concept_min_size, cfg.random_cohort_size));
        cav.random_run = r;
        cavs.push_back(std::move(cav));
      }
    }
  }

  // Global scores per pattern and class.
  json global = json::array();
  std::vector<TcavResult> global_results;
  for (const auto& subset : subsets) {
    if (subset.insufficient || !concept_cavs.count(subset.name)) continue;
    for (int y = 0; y < 2; ++y) {
      if (by_class[y].empty()) continue;
      TcavResult res = tcav_score(subset.name, y, by_class[y], store,
                                  concept_cavs.at(subset.name), random_cavs);
      global.push_back(tcav_result_json(res));
      global_results.push_back(std::move(res));
    }
  }
  write_text(dir / "results.json", global.dump(2) + "\n");
  save_tcav_results(dir / "results_raw.json", global_results);

  // Two local students: the first test student predicted for each class.
  std::vector<std::pair<std::string, int>> locals;
  for (int want = 0; want < 2; ++want)
    for (const auto& id : split.test) {
      const int pred = model.predict(data.encoded.at(id)).label;
      if (pred == want) {
        locals.push_back({id, pred});
        break;
      }
    }
  if (locals.empty())
    for (size_t i = 0; i < std::min<size_t>(2, split.test.size()); ++i)
      locals.push_back({split.test[i], model.predict(data.encoded.at(split.test[i])).label});

  json local_json = json::array();
  for (const auto& [id, pred] : locals) {
    json scores = json::object();
    for (const auto& [name, cavs] : concept_cavs)
      scores[name] = local_tcav(id, pred, store, cavs);
    local_json.push_back(
        {{"student_id", id}, {"predicted_class", pred}, {"scores", scores}});
  }
  write_text(dir / "local.json", local_json.dump(2) + "\n");

  // Confusion cells over the held-out test fold.
  std::vector<std::string> test_ids;
  std::vector<int> preds, labels;
  for (const auto& id : split.test) {
    test_ids.push_back(id);
    preds.push_back(model.predict(data.encoded.at(id)).label);
    labels.push_back(data.labels.at(id));
  }
  json confusion = json::array();
  for (const auto& [name, cavs] : concept_cavs) {
    ConfusionMatrixTcav cm = confusion_matrix_tcav(test_ids, preds, labels, name, store,
                                                   cavs, random_cavs);
    confusion.push_back(tcav_result_json(cm.true_pass, "cell", "true_pass"));
    confusion.push_back(tcav_result_json(cm.false_pass, "cell", "false_pass"));
    confusion.push_back(tcav_result_json(cm.true_fail, "cell", "true_fail"));
    confusion.push_back(tcav_result_json(cm.false_fail, "cell", "false_fail"));
  }
  write_text(dir / "confusion.json", confusion.dump(2) + "\n");
}

LevelData build_level_data(const std::vector<StudentTimeSeries>& kept,
                           const CourseSchedule& schedule, EarlyLevel level) {
  LevelData data;
  for (const auto& s : kept) {
    StudentTimeSeries cut = truncate(s, schedule, level);
    data.encoded[s.student_id] = encode(cut, schedule);
    data.features[s.student_id] = weekly_features(s, schedule, level);
    data.labels[s.student_id] = s.label;
  }
  return data;
}

}  // namespace

LoadedData load_experiment_data(const ExperimentConfig& config) {
  LoadedData data;
  if (config.synth) {
    GeneratedCourse course = generate_course(*config.synth);
    data.schedule = std::move(course.schedule);
    data.students = std::move(course.students);
  } else {
    data.schedule = load_schedule(config.schedule_path);
    data.students = load_clickstream(config.events_path, data.schedule);
    apply_labels(data.students, load_labels(config.labels_path));
  }
  return data;
}

ExperimentSummary run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  write_text(out_dir / "config.json",
             json{{"hash", hex64(config.config_hash())},
                  {"config", json::parse(config.to_json())}}
                     .dump(2) +
                 "\n");

  CourseSchedule schedule;
  std::vector<StudentTimeSeries> students;
  stage("data", [&] {
    fs::create_directories(out_dir / "data");
    if (config.synth) {
      GeneratedCourse course = generate_course(*config.synth);
      schedule = course.schedule;
      students = course.students;
      save_schedule(out_dir / "data" / "schedule.json", schedule);
      save_clickstream(out_dir / "data" / "events.jsonl", students);
      save_labels(out_dir / "data" / "labels.csv", students);
      save_profiles(out_dir / "data" / "profiles.csv", course);
    } else {
      schedule = load_schedule(config.schedule_path);
      students = load_clickstream(config.events_path, schedule);
      apply_labels(students, load_labels(config.labels_path));
    }
    return 0;
  });

  FilterResult filter;
  stage("filter", [&] {
    filter = select_filter_operating_point(students, schedule);
    fs::create_directories(out_dir / "filter");
    write_text(out_dir / "filter" / "report.json", filter.report.to_json() + "\n");
    std::ostringstream removed;
    removed << "student_id,label\n";
    for (const auto& s : filter.removed) removed << s.student_id << "," << s.label << "\n";
    write_text(out_dir / "filter" / "removed.csv", removed.str());
    return 0;
  });
  const std::vector<StudentTimeSeries>& kept = filter.kept;

  DatasetSplit split;
  stage("split", [&] {
    split = split_students(kept, config.seed);
    write_text(out_dir / "split.json",
               json{{"train", split.train},
                    {"validation", split.validation},
                    {"test", split.test},
                    {"seed", split.seed}}
                       .dump(2) +
                   "\n");
    return 0;
  });

  ExperimentSummary summary;
  summary.out_dir = out_dir;

  for (double e : config.levels) {
    const fs::path level_dir = out_dir / level_tag(e);
    fs::create_directories(level_dir);
    const EarlyLevel level{e};

    const LevelData data = stage("preprocess(" + level_tag(e) + ")",
                                 [&] { return build_level_data(kept, schedule, level); });

    std::map<std::string, TrainedModel> trained;
    std::vector<CourseResult> level_results;
    for (const auto& model_name : config.models) {
      TrainedModel tm = stage("train(" + model_name + "," + level_tag(e) + ")", [&] {
        return grid_search(model_name, config, data, split, e,
                           level_dir / ("model_" + model_name));
      });
      CourseResult result = stage("evaluate(" + model_name + "," + level_tag(e) + ")", [&] {
        CourseResult r;
        r.course_id = schedule.course_id;
        r.iteration = schedule.iteration;
        r.model = model_name;
        r.level = e;
        for (const auto& id : split.test) {
          r.student_ids.push_back(id);
          r.predictions.push_back(predict_with(tm, data, id).label);
          r.labels.push_back(data.labels.at(id));
        }
        r.n_students = static_cast<int>(r.student_ids.size());
        r.bac = balanced_accuracy(r.predictions, r.labels);
        return r;
      });
      level_results.push_back(result);
      summary.results.push_back(result);
      trained[model_name] = std::move(tm);
    }
    save_results(level_dir / "results.json", level_results);

    if (trained.count("graph")) {
      std::vector<ConceptSubset> subsets;
      stage("concepts(" + level_tag(e) + ")", [&] {
        std::vector<MeasureVector> rows;
        for (const auto& s : kept)
          rows.push_back(compute_measures(s, schedule, 0.0, level.horizon_seconds(schedule)));
        save_measures(level_dir / "measures.csv", rows);
        for (const auto& spec : pattern_catalogue())
          subsets.push_back(extract_pattern_subset(rows, spec, config.concept_min_size));
        save_subsets(level_dir / "subsets.json", subsets);
        return 0;
      });
      stage("tcav(" + level_tag(e) + ")", [&] {
        run_tcav_suite(config, *trained.at("graph").graph, data, split, subsets,
                       level_dir / "tcav");
        return 0;
      });
    }
  }

  stage("report", [&] {
    emit_report(out_dir);
    return 0;
  });
  return summary;
}

CourseResult train_and_evaluate(const ExperimentConfig& config,
                                const std::string& model_name, double level,
                                const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  LoadedData data = stage("data", [&] { return load_experiment_data(config); });
  FilterResult filter = stage("filter", [&] {
    return select_filter_operating_point(data.students, data.schedule);
  });
  DatasetSplit split =
      stage("split", [&] { return split_students(filter.kept, config.seed); });
  const LevelData level_data = stage("preprocess(" + level_tag(level) + ")", [&] {
    return build_level_data(filter.kept, data.schedule, EarlyLevel{level});
  });

  const fs::path level_dir = out_dir / level_tag(level);
  TrainedModel tm = stage("train(" + model_name + "," + level_tag(level) + ")", [&] {
    return grid_search(model_name, config, level_data, split, level,
                       level_dir / ("model_" + model_name));
  });
  return stage("evaluate(" + model_name + "," + level_tag(level) + ")", [&] {
    CourseResult r;
    r.course_id = data.schedule.course_id;
    r.iteration = data.schedule.iteration;
    r.model = model_name;
    r.level = level;
    for (const auto& id : split.test) {
      r.student_ids.push_back(id);
      r.predictions.push_back(predict_with(tm, level_data, id).label);
      r.labels.push_back(level_data.labels.at(id));
    }
    r.n_students = static_cast<int>(r.student_ids.size());
    r.bac = balanced_accuracy(r.predictions, r.labels);

    std::vector<CourseResult> rows;
    const fs::path results_path = level_dir / "results.json";
    if (fs::exists(results_path)) {
      for (auto& existing : load_results(results_path))
        if (existing.model != model_name) rows.push_back(std::move(existing));
    }
    rows.push_back(r);
    save_results(results_path, rows);
    return r;
  });
}

void run_tcav_for_level(const ExperimentConfig& config, const fs::path& artifact_dir,
                        double level) {
  config.validate();
  const fs::path level_dir = artifact_dir / level_tag(level);
  const fs::path checkpoint = level_dir / "model_graph" / "checkpoint.json";
  if (!fs::exists(checkpoint))
    throw Error("stage tcav: missing graph checkpoint " + checkpoint.string());

  LoadedData data = stage("data", [&] { return load_experiment_data(config); });
  FilterResult filter = stage("filter", [&] {
    return select_filter_operating_point(data.students, data.schedule);
  });
  DatasetSplit split =
      stage("split", [&] { return split_students(filter.kept, config.seed); });
  const LevelData level_data = stage("preprocess(" + level_tag(level) + ")", [&] {
    return build_level_data(filter.kept, data.schedule, EarlyLevel{level});
  });

  std::vector<ConceptSubset> subsets;
  stage("concepts(" + level_tag(level) + ")", [&] {
    if (fs::exists(level_dir / "subsets.json")) {
      subsets = load_subsets(level_dir / "subsets.json");
    } else {
      std::vector<MeasureVector> rows;
      const double horizon = EarlyLevel{level}.horizon_seconds(data.schedule);
      for (const auto& s : filter.kept)
        rows.push_back(compute_measures(s, data.schedule, 0.0, horizon));
      save_measures(level_dir / "measures.csv", rows);
      for (const auto& spec : pattern_catalogue())
        subsets.push_back(extract_pattern_subset(rows, spec, config.concept_min_size));
      save_subsets(level_dir / "subsets.json", subsets);
    }
    return 0;
  });

  GraphModel model = GraphModel::load(checkpoint);
  stage("tcav(" + level_tag(level) + ")", [&] {
    run_tcav_suite(config, model, level_data, split, subsets, level_dir / "tcav");
    return 0;
  });
}

namespace {

std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

svg::Bar bar_from(const json& row) {
  svg::Bar b;
  b.label = row.at("concept").get<std::string>();
  b.value = row.at("score").get<double>();
  b.reference = row.at("random_mean").get<double>();
  b.significant = row.at("p_value").get<double>() < 0.05;
  return b;
}

}  // namespace

void emit_report(const fs::path& artifact_dir) {
  const json config_file = read_json_file(artifact_dir / "config.json");
  const json& cfg = config_file.at("config");
  const std::vector<double> levels = cfg.at("levels").get<std::vector<double>>();
  const std::string reference = cfg.value("reference_model", std::string("graph"));

  const fs::path report_dir = artifact_dir / "report";
  fs::create_directories(report_dir);

  std::vector<CourseResult> all_results;
  std::vector<fs::path> missing;
  for (double e : levels) {
    const fs::path p = artifact_dir / level_tag(e) / "results.json";
    if (!fs::exists(p)) {
      missing.push_back(p);
      continue;
    }
    auto rs = load_results(p);
    all_results.insert(all_results.end(), rs.begin(), rs.end());
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& p : missing) names += " " + p.string();
    throw Error("emit_report: missing artifacts:" + names);
  }

  std::ostringstream table;
  table << "# comparable: relative BAC decrease under 5% vs model " << reference << "\n";
  table << "model,level,course_id,iteration,bac,n_students,ratio_vs_" << reference
        << ",comparability\n";
  for (const auto& r : all_results) {
    std::vector<CourseResult> ref_rows, this_rows{r};
    double ref_bac = r.bac;
    for (const auto& q : all_results)
      if (q.model == reference && q.level == r.level && q.course_id == r.course_id) {
        ref_rows.push_back(q);
        ref_bac = q.bac;
      }
    const std::string ratio =
        ref_rows.empty() ? "n/a" : reference_ratio(ref_rows, this_rows);
    table << r.model << "," << r.level << "," << r.course_id << "," << r.iteration << ","
          << csv_num(r.bac) << "," << r.n_students << "," << ratio << ","
          << comparability_name(comparability_flag(r.bac, ref_bac)) << "\n";
  }
  write_text(report_dir / "table3.csv", table.str());

  for (double e : levels) {
    const fs::path tcav_dir = artifact_dir / level_tag(e) / "tcav";
    if (!fs::exists(tcav_dir / "results.json")) continue;
    const std::string tag = level_tag(e);

    const json global = read_json_file(tcav_dir / "results.json");
    std::ostringstream csv;
    csv << "dimension,pattern,class,score,random_mean,random_std,p_value,n_students\n";
    std::vector<svg::Bar> bars[2];
    for (const auto& row : global) {
      const std::string name = row.at("concept").get<std::string>();
      const auto slash = name.find('/');
      csv << name.substr(0, slash) << "," << name.substr(slash + 1) << ","
          << row.at("class").get<int>() << "," << csv_num(row.at("score").get<double>())
          << "," << csv_num(row.at("random_mean").get<double>()) << ","
          << csv_num(row.at("random_std").get<double>()) << ","
          << csv_num(row.at("p_value").get<double>()) << ","
          << row.at("n_students").get<int>() << "\n";
      bars[row.at("class").get<int>()].push_back(bar_from(row));
    }
    write_text(report_dir / ("tcav_global_" + tag + ".csv"), csv.str());
    svg::write_bar_chart(report_dir / ("tcav_global_" + tag + "_pass.svg"),
                         "TCAV scores, pass class, " + tag, bars[0]);
    svg::write_bar_chart(report_dir / ("tcav_global_" + tag + "_fail.svg"),
                         "TCAV scores, fail class, " + tag, bars[1]);

    const json local = read_json_file(tcav_dir / "local.json");
    std::ostringstream lcsv;
    lcsv << "student_id,predicted_class,dimension,pattern,score\n";
    std::vector<svg::Panel> panels;
    for (const auto& row : local) {
      svg::Panel panel;
      panel.title = row.at("student_id").get<std::string>() + " (pred " +
                    std::to_string(row.at("predicted_class").get<int>()) + ")";
      for (const auto& [name, score] : row.at("scores").items()) {
        const auto slash = name.find('/');
        lcsv << row.at("student_id").get<std::string>() << ","
             << row.at("predicted_class").get<int>() << "," << name.substr(0, slash)
             << "," << name.substr(slash + 1) << "," << csv_num(score.get<double>())
             << "\n";
        panel.bars.push_back({name, score.get<double>(), 0.5, false});
      }
      panels.push_back(std::move(panel));
    }
    write_text(report_dir / ("tcav_local_" + tag + ".csv"), lcsv.str());
    svg::write_panel_grid(report_dir / ("tcav_local_" + tag + ".svg"),
                          "Local TCAV, " + tag, panels, 2);

    const json confusion = read_json_file(tcav_dir / "confusion.json");
    std::ostringstream ccsv;
    ccsv << "cell,dimension,pattern,class,score,random_mean,p_value,n_students,absent\n";
    const std::vector<std::string> cell_order = {"true_pass", "false_pass", "true_fail",
                                                 "false_fail"};
    std::map<std::string, svg::Panel> cell_panels;
    for (const auto& cell : cell_order) cell_panels[cell].title = cell;
    for (const auto& row : confusion) {
      const std::string name = row.at("concept").get<std::string>();
      const auto slash = name.find('/');
      const std::string cell = row.at("cell").get<std::string>();
      ccsv << cell << "," << name.substr(0, slash) << "," << name.substr(slash + 1)
           << "," << row.at("class").get<int>() << ","
           << csv_num(row.at("score").get<double>()) << ","
           << csv_num(row.at("random_mean").get<double>()) << ","
           << csv_num(row.at("p_value").get<double>()) << ","
           << row.at("n_students").get<int>() << ","
           << (row.at("absent").get<bool>() ? 1 : 0) << "\n";
      if (!row.at("absent").get<bool>()) cell_panels[cell].bars.push_back(bar_from(row));
    }
    write_text(report_dir / ("tcav_confusion_" + tag + ".csv"), ccsv.str());
    std::vector<svg::Panel> grid;
    for (const auto& cell : cell_order) grid.push_back(cell_panels[cell]);
    svg::write_panel_grid(report_dir / ("tcav_confusion_" + tag + ".svg"),
                          "Confusion-matrix TCAV, " + tag, grid, 2);
  }
}

}  // namespace coursegraph
