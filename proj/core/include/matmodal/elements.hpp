#pragma once

#include <array>
#include <string>
#include <vector>

#include "matmodal/crystal.hpp"

namespace matmodal {

// Properties used by the composition featurizer, in feature-block order.
enum class ElementProperty : int {
  kAtomicNumber = 0,
  kAtomicMass = 1,
  kElectronegativity = 2,
  kRow = 3,
  kGroup = 4,
  kCovalentRadiusPm = 5,
  kNValence = 6,
  kMendeleevNumber = 7,
};
constexpr int kNumElementProperties = 8;

class ElementTable {
 public:
  // Parses the columnar text table (see data/element_properties.txt).
  static ElementTable load(const std::string& path);

  double property(int z, ElementProperty p) const;
  const std::string& symbol(int z) const;
  int atomic_number(const std::string& symbol) const;  // throws if unknown
  double covalent_radius_angstrom(int z) const {
    return property(z, ElementProperty::kCovalentRadiusPm) / 100.0;
  }
  double electronegativity(int z) const {
    return property(z, ElementProperty::kElectronegativity);
  }

 private:
  void check_z(int z) const;
  std::vector<std::array<double, kNumElementProperties>> props_;  // index z-1
  std::vector<std::string> symbols_;
};

// Default table shipped with the repository; resolved from
// MATMODAL_DATA_DIR (env var) falling back to the compiled-in source path.
const ElementTable& default_element_table();
std::string default_data_dir();

}  // namespace matmodal
