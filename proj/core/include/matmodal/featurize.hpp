#pragma once

#include <vector>

#include "matmodal/crystal.hpp"
#include "matmodal/elements.hpp"

namespace matmodal {

// 8 properties x 6 statistics + 2 stoichiometry features.
constexpr int kNumFeatures = kNumElementProperties * 6 + 2;

using FeatureVector = std::vector<double>;  // length kNumFeatures

// Magpie-style composition statistics. Per property, in order:
//   weighted mean, weighted average deviation, min, max, range, mode
// where weights are atomic fractions, min/max/range run over the elements
// present (unweighted), and mode is the property value of the most abundant
// element (ties broken toward lower atomic number). The trailing two
// features are the L2 norm of the fraction vector and the count of distinct
// elements.
FeatureVector magpie_features(const Composition& comp, const ElementTable& table);

}  // namespace matmodal
