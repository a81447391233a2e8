#pragma once

#include <array>
#include <string>
#include <vector>

#include "matmodal/crystal.hpp"

namespace matmodal {

struct XrdSimConfig {
  double wavelength = 1.5406;   // Cu K-alpha1, Angstrom
  double sigma = 0.3;           // Gaussian smearing width, degrees
  double two_theta_min = 0.0;   // degrees
  double two_theta_max = 90.0;  // degrees
  int n_points = 901;           // 0.1 degree spacing
  bool approximate_form_factors = false;  // f_j = Z_j, for table-less runs

  void validate() const;
  double grid_step() const {
    return (two_theta_max - two_theta_min) / (n_points - 1);
  }
  double grid_point(int i) const { return two_theta_min + i * grid_step(); }
};

struct Reflection {
  std::array<int, 3> hkl;
  double two_theta;  // degrees
};

struct Stick {
  double two_theta;   // degrees
  double intensity;   // arbitrary units, >= 0
};
using StickPattern = std::vector<Stick>;  // strictly increasing two_theta

struct XrdPattern {
  std::vector<double> intensities;  // length n_points, max 100 (or all zero)
};

// Four-Gaussian-plus-constant form factors,
// f(s) = sum_i a_i exp(-b_i s^2) + c with s = sin(theta)/lambda.
class ScatteringTable {
 public:
  static ScatteringTable load(const std::string& path);
  double form_factor(int z, double s) const;
  // self-check: f(0) within 2% of Z for every element
  void verify() const;

 private:
  struct Coeffs {
    double a[4], b[4], c;
  };
  std::vector<Coeffs> coeffs_;  // index z-1
};

const ScatteringTable& default_scattering_table();

std::vector<Reflection> enumerate_reflections(const Lattice& lattice,
                                              const XrdSimConfig& config);

double structure_factor_sq(const CrystalStructure& structure,
                           const std::array<int, 3>& hkl,
                           const ScatteringTable& table,
                           bool approximate = false);

StickPattern simulate_sticks(const CrystalStructure& structure,
                             const XrdSimConfig& config,
                             const ScatteringTable& table);

XrdPattern smear(const StickPattern& sticks, const XrdSimConfig& config);

XrdPattern simulate_pattern(const CrystalStructure& structure,
                            const XrdSimConfig& config,
                            const ScatteringTable& table);

}  // namespace matmodal
