#include <cmath>
#include <random>
#include <set>

#include "doctest.h"

#include "coursegraph/tcav.hpp"
#include "helpers.hpp"

using namespace coursegraph;
using coursegraph::testing::TempDir;

namespace {

// Hand-built record: one gradient per (layer, class), activations unused
// by the scoring path.
TraceRecord make_record(const Eigen::VectorXd& g_emb_pass, const Eigen::VectorXd& g_emb_fail,
                        const Eigen::VectorXd& g_hid_pass, const Eigen::VectorXd& g_hid_fail) {
  TraceRecord rec;
  rec.trace.student_embedding = Eigen::VectorXd::Zero(g_emb_pass.size());
  rec.trace.classifier_hidden = Eigen::VectorXd::Zero(g_hid_pass.size());
  rec.trace.logits.setZero();
  rec.grads[0][0] = g_emb_pass;
  rec.grads[0][1] = g_emb_fail;
  rec.grads[1][0] = g_hid_pass;
  rec.grads[1][1] = g_hid_fail;
  return rec;
}

Cav make_cav(const std::string& name, TraceLayer layer, int run,
             const Eigen::VectorXd& direction) {
  Cav cav;
  cav.concept_name = name;
  cav.layer = layer;
  cav.random_run = run;
  cav.direction = direction.normalized();
  cav.probe_accuracy = 1.0;
  return cav;
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// Store where student k's fail-class derivative along e0 is positive at
// both layers iff k < n_positive; pass-class gradients are the negation.
ActivationStore signed_store(int n, int n_positive) {
  ActivationStore store;
  for (int i = 0; i < n; ++i) {
    const double s = i < n_positive ? 1.0 : -1.0;
    const Eigen::VectorXd fail = vec2(s * (1.0 + 0.01 * i), 0.5);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%03d", i);
    store[buf] = make_record(-fail, fail, -fail, fail);
  }
  return store;
}

std::set<std::string> store_ids(const ActivationStore& store) {
  std::set<std::string> ids;
  for (const auto& [id, rec] : store) ids.insert(id);
  return ids;
}

std::vector<Cav> e0_cavs(const std::string& name, int n_runs = 1) {
  std::vector<Cav> cavs;
  for (int run = 0; run < n_runs; ++run) {
    cavs.push_back(make_cav(name, TraceLayer::StudentEmbedding, run, vec2(1.0, 0.0)));
    cavs.push_back(make_cav(name, TraceLayer::ClassifierHidden, run, vec2(1.0, 0.0)));
  }
  return cavs;
}

}  // namespace

TEST_CASE("welch t-test matches reference p-values") {
  CHECK(welch_t_test({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}) ==
        doctest::Approx(0.10753119493062718).epsilon(1e-9));
  CHECK(welch_t_test({0.52, 0.48, 0.55, 0.50, 0.47}, {0.96, 1.0, 0.98, 1.0, 0.94}) ==
        doctest::Approx(1.0556135096066732e-08).epsilon(1e-6));
  // Equal means cancel the statistic exactly.
  CHECK(welch_t_test({1.0, 2.0, 3.0}, {1.5, 2.5, 2.0}) == doctest::Approx(1.0));
}

TEST_CASE("welch t-test handles degenerate samples") {
  CHECK(welch_t_test({}, {1.0, 2.0}) == 1.0);
  CHECK(welch_t_test({0.5}, {0.5, 0.5}) == 1.0);
  CHECK(welch_t_test({0.5}, {0.9, 0.9}) == 0.0);
  // Zero variance on both sides: means decide.
  CHECK(welch_t_test({0.5, 0.5, 0.5}, {0.5, 0.5}) == 1.0);
  CHECK(welch_t_test({1.0, 1.0, 1.0}, {0.5, 0.5}) == 0.0);
}

TEST_CASE("directional derivative is the gradient-CAV dot product") {
  TraceRecord rec = make_record(vec2(3.0, -4.0), vec2(-1.0, 2.0), vec2(0.0, 1.0),
                                vec2(2.0, 0.0));
  const Cav emb = make_cav("c", TraceLayer::StudentEmbedding, 0, vec2(0.6, 0.8));
  CHECK(directional_derivative(rec, emb, 0) == doctest::Approx(3.0 * 0.6 - 4.0 * 0.8));
  CHECK(directional_derivative(rec, emb, 1) == doctest::Approx(-0.6 + 1.6));

  // Orthogonal gradient contributes nothing.
  const Cav hid = make_cav("c", TraceLayer::ClassifierHidden, 0, vec2(1.0, 0.0));
  CHECK(directional_derivative(rec, hid, 0) == doctest::Approx(0.0));

  CHECK_THROWS_AS(directional_derivative(rec, emb, 2), Error);
  const Cav bad = make_cav("c", TraceLayer::StudentEmbedding, 0, Eigen::VectorXd::Ones(3));
  CHECK_THROWS_AS(directional_derivative(rec, bad, 1), Error);
}

TEST_CASE("tcav score averages per-layer positive fractions") {
  // Four students: layer 0 has 3/4 positive fail-derivatives, layer 1 has
  // 1/4, so the layer scores are 0.75 and 0.25 and the mean is 0.5.
  ActivationStore store;
  for (int i = 0; i < 4; ++i) {
    const double emb = i < 3 ? 1.0 : -1.0;
    const double hid = i < 1 ? 1.0 : -1.0;
    store["s" + std::to_string(i)] =
        make_record(vec2(9.0, 9.0), vec2(emb, 0.0), vec2(9.0, 9.0), vec2(hid, 0.0));
  }
  const TcavResult r = tcav_score("effort/higher", 1, store_ids(store), store,
                                  e0_cavs("effort/higher"), {});
  CHECK(r.concept_name == "effort/higher");
  CHECK(r.cls == 1);
  CHECK(r.n_students == 4);
  REQUIRE(r.layer_scores.size() == 2);
  CHECK(r.layer_scores[0] == doctest::Approx(0.75));
  CHECK(r.layer_scores[1] == doctest::Approx(0.25));
  CHECK(r.score == doctest::Approx(0.5));
  CHECK(r.random_scores.empty());
  CHECK(r.p_value == 1.0);
}

TEST_CASE("aligned gradients score one and the opposite class flips it") {
  const ActivationStore store = signed_store(200, 200);
  const auto cavs = e0_cavs("effort/higher");
  const TcavResult fail = tcav_score("effort/higher", 1, store_ids(store), store, cavs, {});
  CHECK(fail.score == doctest::Approx(1.0));
  const TcavResult pass = tcav_score("effort/higher", 0, store_ids(store), store, cavs, {});
  CHECK(pass.score == doctest::Approx(1.0 - fail.score));
}

TEST_CASE("a 120 of 200 cohort scores 0.6") {
  const ActivationStore store = signed_store(200, 120);
  const TcavResult r =
      tcav_score("effort/higher", 1, store_ids(store), store, e0_cavs("effort/higher"), {});
  CHECK(r.score == doctest::Approx(0.6));
  CHECK(r.layer_scores[0] == doctest::Approx(0.6));
  CHECK(r.layer_scores[1] == doctest::Approx(0.6));
}

TEST_CASE("a singleton cohort equals the local score") {
  const ActivationStore store = signed_store(10, 5);
  const auto cavs = e0_cavs("effort/higher", 3);
  for (const auto& id : store_ids(store)) {
    const TcavResult r = tcav_score("effort/higher", 1, {id}, store, cavs, {});
    CHECK(local_tcav(id, 1, store, cavs) == doctest::Approx(r.score));
  }
  CHECK(local_tcav("s002", 1, store, cavs) == doctest::Approx(1.0));
  CHECK(local_tcav("s007", 1, store, cavs) == doctest::Approx(0.0));
}

TEST_CASE("concept runs separate from random runs in the p-value") {
  // Fail-class gradients point along e0 with an alternating-sign second
  // component, so e0 CAVs saturate while tilted ones hover near chance.
  ActivationStore store;
  for (int i = 0; i < 100; ++i) {
    const double sign = i % 2 == 1 ? -1.0 : 1.0;
    const Eigen::VectorXd fail = vec2(1.0 + 0.01 * i, sign * (0.2 + 0.006 * i));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%03d", i);
    store[buf] = make_record(-fail, fail, -fail, fail);
  }
  const auto ids = store_ids(store);
  const auto concept_cavs = e0_cavs("effort/higher", 5);
  std::vector<Cav> random_cavs;
  for (int run = 0; run < 5; ++run) {
    const double angle = 1.30 + 0.05 * run;
    const Eigen::VectorXd dir = vec2(std::cos(angle), std::sin(angle));
    random_cavs.push_back(make_cav("random", TraceLayer::StudentEmbedding, run, dir));
    random_cavs.push_back(make_cav("random", TraceLayer::ClassifierHidden, run, dir));
  }
  const TcavResult r =
      tcav_score("effort/higher", 1, ids, store, concept_cavs, random_cavs);
  CHECK(r.score == doctest::Approx(1.0));
  CHECK(r.random_scores.size() == 5);
  for (double v : r.random_scores) CHECK(v < 0.9);
  CHECK(r.p_value < 0.05);

  CHECK_THROWS_AS(tcav_score("effort/higher", 1, {}, store, concept_cavs, random_cavs),
                  Error);
  CHECK_THROWS_AS(tcav_score("effort/higher", 1, ids, store, {}, random_cavs), Error);
}

TEST_CASE("fit_cav recovers an injected offset direction") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 1.0);
  const int dim = 8;
  // Equal magnitudes keep the probe direction aligned with the offset
  // after per-feature standardization.
  Eigen::VectorXd offset = Eigen::VectorXd::Zero(dim);
  offset(2) = 4.0;
  offset(5) = -4.0;

  ActivationStore store;
  ConceptSubset concept_set, random_set;
  concept_set.name = "effort/higher";
  random_set.name = "random/0";
  for (int i = 0; i < 300; ++i) {
    Eigen::VectorXd a(dim);
    for (int j = 0; j < dim; ++j) a(j) = noise(rng);
    const bool in_concept = i < 150;
    if (in_concept) a += offset;
    TraceRecord rec;
    rec.trace.student_embedding = a;
    rec.trace.classifier_hidden = a;
    rec.trace.logits.setZero();
    for (int l = 0; l < 2; ++l)
      for (int y = 0; y < 2; ++y) rec.grads[l][y] = Eigen::VectorXd::Zero(dim);
    const std::string id = "s" + std::to_string(i);
    store[id] = rec;
    (in_concept ? concept_set : random_set).student_ids.insert(id);
  }

  const Cav cav =
      fit_cav(concept_set, random_set, store, TraceLayer::StudentEmbedding, 7);
  CHECK(cav.concept_name == "effort/higher");
  CHECK(cav.direction.norm() == doctest::Approx(1.0));
  CHECK(cav.direction.dot(offset.normalized()) > 0.95);
  CHECK(cav.probe_accuracy >= 0.95);
  CHECK_FALSE(cav.weak);

  SUBCASE("overlapping cohorts are rejected") {
    ConceptSubset overlap = random_set;
    overlap.student_ids.insert(*concept_set.student_ids.begin());
    CHECK_THROWS_AS(
        fit_cav(concept_set, overlap, store, TraceLayer::StudentEmbedding, 7), Error);
  }
  SUBCASE("undersized cohorts are rejected") {
    ConceptSubset tiny;
    tiny.name = "tiny";
    for (int i = 0; i < 40; ++i) tiny.student_ids.insert("s" + std::to_string(i));
    CHECK_THROWS_AS(fit_cav(tiny, random_set, store, TraceLayer::StudentEmbedding, 7),
                    Error);
  }
}

TEST_CASE("an indistinguishable cohort produces a weak probe") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  ActivationStore store;
  ConceptSubset a_set, b_set;
  a_set.name = "concept";
  b_set.name = "random/0";
  for (int i = 0; i < 400; ++i) {
    Eigen::VectorXd a(6);
    for (int j = 0; j < 6; ++j) a(j) = noise(rng);
    TraceRecord rec;
    rec.trace.student_embedding = a;
    rec.trace.classifier_hidden = a;
    rec.trace.logits.setZero();
    for (int l = 0; l < 2; ++l)
      for (int y = 0; y < 2; ++y) rec.grads[l][y] = Eigen::VectorXd::Zero(6);
    const std::string id = "s" + std::to_string(i);
    store[id] = rec;
    (i % 2 == 0 ? a_set : b_set).student_ids.insert(id);
  }
  const Cav cav = fit_cav(a_set, b_set, store, TraceLayer::ClassifierHidden, 3);
  CHECK(cav.probe_accuracy < 0.68);
  CHECK(cav.weak == (cav.probe_accuracy < 0.55));
}

TEST_CASE("the activation store matches direct model calls") {
  GraphModelConfig cfg;
  cfg.d_h = 4;
  cfg.d_t = 4;
  cfg.d_z = 4;
  cfg.d_f = 6;
  cfg.seed = 21;
  const GraphModel model(cfg);

  std::vector<EncodedSeries> students;
  for (int i = 0; i < 3; ++i) {
    EncodedSeries enc;
    enc.student_id = "s" + std::to_string(i);
    for (int k = 0; k < 4 + i; ++k) {
      enc.times.push_back(0.5 * (k + 1));
      enc.channels.push_back(k % 10);
      enc.values.push_back(0.2 * (i + 1));
    }
    students.push_back(std::move(enc));
  }

  const ActivationStore store = build_activation_store(model, students);
  REQUIRE(store.size() == students.size());
  for (const auto& s : students) {
    const TraceRecord& rec = store.at(s.student_id);
    const ForwardResult fr = model.forward(s);
    CHECK((rec.trace.student_embedding - fr.trace.student_embedding).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((rec.trace.logits - fr.logits).cwiseAbs().maxCoeff() < 1e-12);
    for (int l = 0; l < kNumTraceLayers; ++l) {
      const auto layer = static_cast<TraceLayer>(l);
      CHECK(rec.grads[l][0].size() == rec.trace.layer(layer).size());
      const Eigen::VectorXd g = model.grad_wrt_activation(s, layer, 1);
      CHECK((rec.grads[l][1] - g).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("the confusion matrix partitions students and flags empty cells") {
  const ActivationStore store = signed_store(8, 8);
  const std::set<std::string> id_set = store_ids(store);
  const std::vector<std::string> ids(id_set.begin(), id_set.end());
  // Predictions and labels fill three cells and leave false_fail empty.
  const std::vector<int> predictions = {0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> labels = {0, 0, 0, 1, 1, 1, 1, 1};
  const auto cavs = e0_cavs("effort/higher");

  const ConfusionMatrixTcav cm =
      confusion_matrix_tcav(ids, predictions, labels, "effort/higher", store, cavs, {});
  CHECK(cm.true_pass.n_students == 3);
  CHECK(cm.false_pass.n_students == 1);
  CHECK(cm.true_fail.n_students == 4);
  CHECK(cm.false_fail.absent);
  CHECK(cm.false_fail.n_students == 0);
  CHECK(cm.true_pass.cls == 0);
  CHECK(cm.false_pass.cls == 0);
  CHECK(cm.true_fail.cls == 1);
  CHECK(cm.false_fail.cls == 1);
  // Every fail-class derivative is positive in this store.
  CHECK(cm.true_fail.score == doctest::Approx(1.0));
  CHECK(cm.true_pass.score == doctest::Approx(0.0));

  CHECK_THROWS_AS(
      confusion_matrix_tcav(ids, {0, 1}, labels, "effort/higher", store, cavs, {}), Error);
}

TEST_CASE("tcav results survive a JSON round trip") {
  TempDir dir("tcav-json");
  std::vector<TcavResult> results(2);
  results[0].concept_name = "effort/higher";
  results[0].cls = 1;
  results[0].score = 0.85;
  results[0].layer_scores = {0.9, 0.8};
  results[0].random_scores = {0.5, 0.45, 0.55};
  results[0].p_value = 0.003;
  results[0].n_students = 220;
  results[1].concept_name = "regularity/lower";
  results[1].cls = 0;
  results[1].absent = true;

  save_tcav_results(dir / "tcav.json", results);
  const auto loaded = load_tcav_results(dir / "tcav.json");
  REQUIRE(loaded.size() == 2);
  for (size_t i = 0; i < 2; ++i) {
    CHECK(loaded[i].concept_name == results[i].concept_name);
    CHECK(loaded[i].cls == results[i].cls);
    CHECK(loaded[i].score == doctest::Approx(results[i].score));
    CHECK(loaded[i].layer_scores == results[i].layer_scores);
    CHECK(loaded[i].random_scores == results[i].random_scores);
    CHECK(loaded[i].p_value == doctest::Approx(results[i].p_value));
    CHECK(loaded[i].n_students == results[i].n_students);
    CHECK(loaded[i].absent == results[i].absent);
  }
  CHECK_THROWS_AS(load_tcav_results(dir / "missing.json"), Error);
}
