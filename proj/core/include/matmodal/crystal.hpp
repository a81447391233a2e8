#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace matmodal {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;  // row-major

constexpr int kMaxAtomicNumber = 98;  // scattering table coverage

struct Lattice {
  double a = 1.0, b = 1.0, c = 1.0;       // lengths in Angstrom
  double alpha = 90.0, beta = 90.0, gamma = 90.0;  // angles in degrees

  void validate() const;  // throws std::invalid_argument
};

enum class CrystalSystem : int {
  kCubic = 0,
  kHexagonal = 1,
  kTrigonal = 2,
  kTetragonal = 3,
  kOrthorhombic = 4,
  kMonoclinic = 5,
  kTriclinic = 6,
};
constexpr int kNumCrystalSystems = 7;

const std::string& crystal_system_name(CrystalSystem s);
CrystalSystem crystal_system_from_name(const std::string& name);

struct CrystalStructure {
  Lattice lattice;
  std::vector<int> species;       // atomic numbers, 1..98
  std::vector<Vec3> frac_coords;  // components wrapped into [0,1)

  void validate() const;
  std::size_t num_atoms() const { return species.size(); }
};

struct Composition {
  std::map<int, double> amounts;  // atomic number -> positive count

  void validate() const;
};

double wrap_frac(double x);  // into [0,1)

// Row i of the returned matrix is lattice vector i (a along x convention).
Mat3 lattice_matrix(const Lattice& lat);

double cell_volume(const Lattice& lat);  // Angstrom^3

Vec3 frac_to_cart(const Lattice& lat, const Vec3& frac);
Vec3 cart_to_frac(const Lattice& lat, const Vec3& cart);

// Interplanar spacing from the reciprocal metric tensor; hkl must be nonzero.
double d_spacing(const Lattice& lat, const std::array<int, 3>& hkl);

CrystalSystem classify_crystal_system(const Lattice& lat,
                                      double rel_tol = 1e-3,
                                      double angle_tol = 0.1);

Composition composition_of(const CrystalStructure& s);

}  // namespace matmodal
