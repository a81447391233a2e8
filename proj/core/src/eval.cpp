#include "matmodal/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "matmodal/crystal.hpp"

namespace matmodal {

double mae(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty())
    throw std::invalid_argument("mae: length mismatch or empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    total += std::abs(pred[i] - target[i]);
  return total / pred.size();
}

namespace {
void check_labels(const std::vector<int>& preds, const std::vector<int>& targets) {
  if (preds.size() != targets.size() || preds.empty())
    throw std::invalid_argument("accuracy: length mismatch or empty input");
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] < 0 || preds[i] > 6 || targets[i] < 0 || targets[i] > 6)
      throw std::invalid_argument("accuracy: label out of range 0..6");
}
}  // namespace

double accuracy(const std::vector<int>& preds, const std::vector<int>& targets) {
  check_labels(preds, targets);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == targets[i]) ++correct;
  return static_cast<double>(correct) / preds.size();
}

std::map<int, double> per_class_accuracy(const std::vector<int>& preds,
                                         const std::vector<int>& targets) {
  check_labels(preds, targets);
  std::map<int, std::pair<int, int>> tallies;  // class -> {correct, count}
  for (std::size_t i = 0; i < preds.size(); ++i) {
    auto& [correct, count] = tallies[targets[i]];
    ++count;
    if (preds[i] == targets[i]) ++correct;
  }
  std::map<int, double> out;
  for (const auto& [cls, tally] : tallies)
    out[cls] = static_cast<double>(tally.first) / tally.second;
  return out;
}

std::array<std::array<int, 7>, 7> confusion_matrix(
    const std::vector<int>& preds, const std::vector<int>& targets) {
  check_labels(preds, targets);
  std::array<std::array<int, 7>, 7> m{};
  for (std::size_t i = 0; i < preds.size(); ++i) ++m[targets[i]][preds[i]];
  return m;
}

double silhouette(const std::vector<std::vector<double>>& embeddings,
                  const std::vector<int>& labels) {
  const std::size_t n = embeddings.size();
  if (n != labels.size())
    throw std::invalid_argument("silhouette: embeddings/labels size mismatch");
  if (n < 3) throw std::invalid_argument("silhouette: need at least 3 points");
  std::map<int, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[labels[i]].push_back(i);
  if (clusters.size() < 2)
    throw std::invalid_argument("silhouette: need at least 2 distinct labels");

  const std::size_t d = embeddings[0].size();
  for (const auto& e : embeddings)
    if (e.size() != d)
      throw std::invalid_argument("silhouette: ragged embedding rows");

  auto dist = [&](std::size_t i, std::size_t j) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = embeddings[i][k] - embeddings[j][k];
      sq += diff * diff;
    }
    return std::sqrt(sq);
  };

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& own = clusters.at(labels[i]);
    if (own.size() == 1) continue;  // singleton contributes 0
    double a = 0.0;
    for (std::size_t j : own)
      if (j != i) a += dist(i, j);
    a /= own.size() - 1;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [lbl, members] : clusters) {
      if (lbl == labels[i]) continue;
      double mean_d = 0.0;
      for (std::size_t j : members) mean_d += dist(i, j);
      b = std::min(b, mean_d / members.size());
    }
    total += (b - a) / std::max(a, b);
  }
  return total / n;
}

std::vector<std::array<double, 3>> pca3_export(
    const std::vector<std::vector<double>>& embeddings) {
  const std::size_t n = embeddings.size();
  if (n < 3) throw std::invalid_argument("pca3_export: need at least 3 points");
  const std::size_t d = embeddings[0].size();
  if (d < 3)
    throw std::invalid_argument("pca3_export: need at least 3 dimensions");
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings[i].size() != d)
      throw std::invalid_argument("pca3_export: ragged embedding rows");
    for (std::size_t k = 0; k < d; ++k) x(i, k) = embeddings[i][k];
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("pca3_export: eigendecomposition failed");

  // eigenvalues ascend; take the top three, zeroing rank-deficient directions
  const double rank_eps = 1e-12 * std::max(1.0, solver.eigenvalues().maxCoeff());
  std::vector<std::array<double, 3>> out(n, {0.0, 0.0, 0.0});
  for (int c = 0; c < 3; ++c) {
    const int idx = static_cast<int>(d) - 1 - c;
    if (solver.eigenvalues()(idx) <= rank_eps) continue;
    Eigen::VectorXd dir = solver.eigenvectors().col(idx);
    int arg_max = 0;
    dir.cwiseAbs().maxCoeff(&arg_max);
    if (dir(arg_max) < 0.0) dir = -dir;
    const Eigen::VectorXd proj = x * dir;
    for (std::size_t i = 0; i < n; ++i) out[i][c] = proj(static_cast<int>(i));
  }
  return out;
}

std::string EvalReport::to_json_string() const {
  nlohmann::json j;
  j["counts"] = {{"train", n_train}, {"val", n_val}, {"test", n_test}};
  auto set_opt = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  set_opt("lattice_length_mae", lattice_length_mae);
  set_opt("lattice_angle_mae", lattice_angle_mae);
  set_opt("energy_mae", energy_mae);
  set_opt("classification_accuracy", classification_accuracy);
  if (!per_class.empty()) {
    nlohmann::json pc = nlohmann::json::object();
    for (const auto& [cls, acc] : per_class)
      pc[crystal_system_name(static_cast<CrystalSystem>(cls))] = acc;
    j["per_class_accuracy"] = pc;
    j["confusion_matrix"] = confusion;
  }
  set_opt("silhouette", silhouette_score);
  if (silhouette_score) j["silhouette_space"] = silhouette_space;
  return j.dump(2);
}

}  // namespace matmodal
