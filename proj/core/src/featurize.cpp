#include "matmodal/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace matmodal {

FeatureVector magpie_features(const Composition& comp,
                              const ElementTable& table) {
  comp.validate();
  double total = 0.0;
  for (const auto& [z, amt] : comp.amounts) total += amt;

  // mode element: largest fraction, ties toward lower Z (map is Z-ordered)
  int mode_z = 0;
  double mode_amt = -1.0;
  for (const auto& [z, amt] : comp.amounts)
    if (amt > mode_amt) mode_amt = amt, mode_z = z;

  FeatureVector out;
  out.reserve(kNumFeatures);
  for (int p = 0; p < kNumElementProperties; ++p) {
    const auto prop = static_cast<ElementProperty>(p);
    double mean = 0.0;
    double pmin = std::numeric_limits<double>::infinity();
    double pmax = -std::numeric_limits<double>::infinity();
    for (const auto& [z, amt] : comp.amounts) {
      const double v = table.property(z, prop);
      mean += (amt / total) * v;
      pmin = std::min(pmin, v);
      pmax = std::max(pmax, v);
    }
    double avg_dev = 0.0;
    for (const auto& [z, amt] : comp.amounts)
      avg_dev += (amt / total) * std::abs(table.property(z, prop) - mean);
    out.push_back(mean);
    out.push_back(avg_dev);
    out.push_back(pmin);
    out.push_back(pmax);
    out.push_back(pmax - pmin);
    out.push_back(table.property(mode_z, prop));
  }
  double norm2 = 0.0;
  for (const auto& [z, amt] : comp.amounts) {
    const double x = amt / total;
    norm2 += x * x;
  }
  out.push_back(std::sqrt(norm2));
  out.push_back(static_cast<double>(comp.amounts.size()));
  return out;
}

}  // namespace matmodal
