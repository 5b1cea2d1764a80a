#include "coursegraph/tcav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "coursegraph/logistic.hpp"
#include "json.hpp"

namespace coursegraph {

ActivationStore build_activation_store(const GraphModel& model,
                                       const std::vector<EncodedSeries>& students) {
  ActivationStore store;
  for (const auto& s : students) {
    TraceRecord rec;
    rec.trace = model.forward(s).trace;
    for (int l = 0; l < kNumTraceLayers; ++l)
      for (int y = 0; y < 2; ++y)
        rec.grads[l][y] = model.grad_wrt_activation(s, static_cast<TraceLayer>(l), y);
    store[s.student_id] = std::move(rec);
  }
  return store;
}

namespace {

Eigen::MatrixXd gather_activations(const ConceptSubset& subset,
                                   const ActivationStore& traces, TraceLayer layer) {
  Eigen::MatrixXd X;
  Eigen::Index row = 0;
  for (const auto& id : subset.student_ids) {
    auto it = traces.find(id);
    if (it == traces.end()) throw Error("fit_cav: missing trace for student " + id);
    const Eigen::VectorXd& a = it->second.trace.layer(layer);
    if (X.size() == 0) X.resize(subset.student_ids.size(), a.size());
    X.row(row++) = a.transpose();
  }
  return X;
}

}  // namespace

Cav fit_cav(const ConceptSubset& concept_set, const ConceptSubset& random,
            const ActivationStore& traces, TraceLayer layer, uint64_t seed,
            int min_size) {
  if (concept_set.student_ids.size() < static_cast<size_t>(min_size) ||
      random.student_ids.size() < static_cast<size_t>(min_size))
    throw Error("fit_cav: both cohorts need at least " + std::to_string(min_size) +
                " students");
  for (const auto& id : concept_set.student_ids)
    if (random.student_ids.count(id))
      throw Error("fit_cav: student " + id + " appears in both cohorts");

  const Eigen::MatrixXd Xc = gather_activations(concept_set, traces, layer);
  const Eigen::MatrixXd Xr = gather_activations(random, traces, layer);

  std::mt19937_64 rng(seed);
  auto split = [&rng](Eigen::Index n) {
    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    const Eigen::Index n_train = n - n / 5;
    return std::pair(std::vector<Eigen::Index>(idx.begin(), idx.begin() + n_train),
                     std::vector<Eigen::Index>(idx.begin() + n_train, idx.end()));
  };
  auto [c_train, c_test] = split(Xc.rows());
  auto [r_train, r_test] = split(Xr.rows());

  Eigen::MatrixXd X(c_train.size() + r_train.size(), Xc.cols());
  Eigen::VectorXd y(X.rows());
  Eigen::Index row = 0;
  for (auto i : c_train) {
    X.row(row) = Xc.row(i);
    y(row++) = 1.0;
  }
  for (auto i : r_train) {
    X.row(row) = Xr.row(i);
    y(row++) = 0.0;
  }

  LogisticModel probe = fit_logistic(X, y);

  int correct = 0, total = 0;
  for (auto i : c_test) {
    correct += probe.decision(Xc.row(i).transpose()) > 0.0 ? 1 : 0;
    ++total;
  }
  for (auto i : r_test) {
    correct += probe.decision(Xr.row(i).transpose()) <= 0.0 ? 1 : 0;
    ++total;
  }

  Cav cav;
  cav.concept_name = concept_set.name;
  cav.layer = layer;
  const double norm = probe.weights.norm();
  if (norm <= 0.0) throw Error("fit_cav: degenerate probe with zero weight vector");
  cav.direction = probe.weights / norm;
  cav.probe_accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
  cav.weak = cav.probe_accuracy < 0.55;
  return cav;
}

double directional_derivative(const TraceRecord& record, const Cav& cav, int y) {
  if (y != 0 && y != 1) throw Error("directional_derivative: class must be 0 or 1");
  const Eigen::VectorXd& g = record.grads[static_cast<int>(cav.layer)][y];
  if (g.size() != cav.direction.size())
    throw Error("directional_derivative: gradient and CAV dimensions differ");
  return g.dot(cav.direction);
}

double welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= std::max(n - 1.0, 1.0);
    return std::pair(mean, var);
  };
  if (a.size() < 2 || b.size() < 2) {
    if (a.empty() || b.empty()) return 1.0;
    return moments(a).first == moments(b).first ? 1.0 : 0.0;
  }
  auto [ma, va] = moments(a);
  auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  if (se2 <= 0.0) return ma == mb ? 1.0 : 0.0;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / (va * va / (na * na * (na - 1.0)) +
                                 vb * vb / (nb * nb * (nb - 1.0)));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

namespace {

std::vector<int> distinct_runs(const std::vector<Cav>& cavs) {
  std::set<int> runs;
  for (const auto& c : cavs) runs.insert(c.random_run);
  return {runs.begin(), runs.end()};
}

const Cav& cav_for(const std::vector<Cav>& cavs, TraceLayer layer, int run) {
  for (const auto& c : cavs)
    if (c.layer == layer && c.random_run == run) return c;
  throw Error("tcav: missing CAV for layer " + trace_layer_name(layer) + ", run " +
              std::to_string(run));
}

// Per-run layer-averaged positive fractions over the cohort.
std::vector<double> run_scores(const std::set<std::string>& students,
                               const ActivationStore& traces, int y,
                               const std::vector<Cav>& cavs,
                               std::vector<double>* layer_means = nullptr) {
  const auto runs = distinct_runs(cavs);
  std::vector<std::vector<double>> per_layer(kNumTraceLayers);
  std::vector<double> scores;
  for (int run : runs) {
    double layer_sum = 0.0;
    for (int l = 0; l < kNumTraceLayers; ++l) {
      const Cav& cav = cav_for(cavs, static_cast<TraceLayer>(l), run);
      int positives = 0;
      for (const auto& id : students) {
        auto it = traces.find(id);
        if (it == traces.end()) throw Error("tcav: missing trace for student " + id);
        if (directional_derivative(it->second, cav, y) > 0.0) ++positives;
      }
      const double frac = static_cast<double>(positives) / students.size();
      per_layer[l].push_back(frac);
      layer_sum += frac;
    }
    scores.push_back(layer_sum / kNumTraceLayers);
  }
  if (layer_means) {
    layer_means->clear();
    for (int l = 0; l < kNumTraceLayers; ++l) {
      double m = 0.0;
      for (double v : per_layer[l]) m += v;
      layer_means->push_back(m / per_layer[l].size());
    }
  }
  return scores;
}

}  // namespace

TcavResult tcav_score(const std::string& concept_name, int y,
                      const std::set<std::string>& students, const ActivationStore& traces,
                      const std::vector<Cav>& concept_cavs,
                      const std::vector<Cav>& random_cavs) {
  if (students.empty()) throw Error("tcav_score: empty student cohort");
  if (concept_cavs.empty()) throw Error("tcav_score: no concept CAVs supplied");

  TcavResult result;
  result.concept_name = concept_name;
  result.cls = y;
  result.n_students = static_cast<int>(students.size());

  const auto concept_scores =
      run_scores(students, traces, y, concept_cavs, &result.layer_scores);
  result.score = 0.0;
  for (double v : result.layer_scores) result.score += v;
  result.score /= result.layer_scores.size();

  if (!random_cavs.empty()) {
    result.random_scores = run_scores(students, traces, y, random_cavs);
    result.p_value = welch_t_test(concept_scores, result.random_scores);
  }
  return result;
}

double local_tcav(const std::string& student, int y, const ActivationStore& traces,
                  const std::vector<Cav>& concept_cavs) {
  TcavResult r = tcav_score(concept_cavs.front().concept_name, y, {student}, traces,
                            concept_cavs, {});
  return r.score;
}

ConfusionMatrixTcav confusion_matrix_tcav(const std::vector<std::string>& student_ids,
                                          const std::vector<int>& predictions,
                                          const std::vector<int>& labels,
                                          const std::string& concept_name,
                                          const ActivationStore& traces,
                                          const std::vector<Cav>& concept_cavs,
                                          const std::vector<Cav>& random_cavs) {
  if (student_ids.size() != predictions.size() || student_ids.size() != labels.size())
    throw Error("confusion_matrix_tcav: misaligned predictions and labels");

  std::set<std::string> cells[2][2];  // [prediction][label]
  for (size_t i = 0; i < student_ids.size(); ++i)
    cells[predictions[i]][labels[i]].insert(student_ids[i]);

  auto score_cell = [&](const std::set<std::string>& members, int y) {
    if (members.empty()) {
      TcavResult r;
      r.concept_name = concept_name;
      r.cls = y;
      r.absent = true;
      return r;
    }
    return tcav_score(concept_name, y, members, traces, concept_cavs, random_cavs);
  };

  ConfusionMatrixTcav out;
  out.true_pass = score_cell(cells[0][0], 0);
  out.false_pass = score_cell(cells[0][1], 0);
  out.true_fail = score_cell(cells[1][1], 1);
  out.false_fail = score_cell(cells[1][0], 1);
  return out;
}

void save_tcav_results(const std::filesystem::path& path,
                       const std::vector<TcavResult>& results) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : results) {
    j.push_back({{"concept", r.concept_name},
                 {"class", r.cls},
                 {"score", r.score},
                 {"layer_scores", r.layer_scores},
                 {"random_scores", r.random_scores},
                 {"p_value", r.p_value},
                 {"n_students", r.n_students},
                 {"absent", r.absent}});
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path.string());
  out << j.dump(2) << "\n";
}

std::vector<TcavResult> load_tcav_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path.string());
  nlohmann::json j;
  in >> j;
  std::vector<TcavResult> out;
  for (const auto& jr : j) {
    TcavResult r;
    r.concept_name = jr.at("concept").get<std::string>();
    r.cls = jr.at("class").get<int>();
    r.score = jr.at("score").get<double>();
    r.layer_scores = jr.at("layer_scores").get<std::vector<double>>();
    r.random_scores = jr.at("random_scores").get<std::vector<double>>();
    r.p_value = jr.at("p_value").get<double>();
    r.n_students = jr.at("n_students").get<int>();
    r.absent = jr.at("absent").get<bool>();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace coursegraph
