#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matmodal/crystal.hpp"

namespace matmodal {

double mae(const std::vector<double>& pred, const std::vector<double>& target);

double accuracy(const std::vector<int>& preds, const std::vector<int>& targets);

// Fraction correct per class that occurs in targets; classes with no targets
// are absent from the map.
std::map<int, double> per_class_accuracy(const std::vector<int>& preds,
                                         const std::vector<int>& targets);

// counts[target][pred], 7x7
std::array<std::array<int, 7>, 7> confusion_matrix(
    const std::vector<int>& preds, const std::vector<int>& targets);

// Mean silhouette coefficient with Euclidean distance over full-dimension
// embeddings. Singleton clusters contribute 0. Throws unless there are at
// least two distinct labels and three points.
double silhouette(const std::vector<std::vector<double>>& embeddings,
                  const std::vector<int>& labels);

// Mean-centered projection onto the top three principal directions. Each
// direction is signed so its largest-magnitude component is positive;
// directions beyond the data rank project to zero.
std::vector<std::array<double, 3>> pca3_export(
    const std::vector<std::vector<double>>& embeddings);

struct EvalReport {
  int n_train = 0, n_val = 0, n_test = 0;
  std::optional<double> lattice_length_mae;  // Angstrom, mean over a,b,c
  std::optional<double> lattice_angle_mae;   // degrees, mean over alpha,beta,gamma
  std::optional<double> energy_mae;          // eV/atom
  std::optional<double> classification_accuracy;
  std::map<int, double> per_class;  // crystal-system index -> accuracy
  std::array<std::array<int, 7>, 7> confusion{};
  std::optional<double> silhouette_score;
  std::string silhouette_space = "full_dimension";

  std::string to_json_string() const;
};

}  // namespace matmodal
