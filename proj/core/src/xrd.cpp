#include "matmodal/xrd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "matmodal/elements.hpp"

namespace matmodal {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kMergeTolDeg = 0.01;     // well below grid step and sigma
constexpr double kIntensityFloor = 1e-8;  // relative to strongest stick
}  // namespace

void XrdSimConfig::validate() const {
  if (!(wavelength > 0.0)) throw std::invalid_argument("XrdSimConfig: wavelength <= 0");
  if (!(sigma > 0.0)) throw std::invalid_argument("XrdSimConfig: sigma <= 0");
  if (!(two_theta_min < two_theta_max))
    throw std::invalid_argument("XrdSimConfig: two_theta_min >= two_theta_max");
  if (n_points < 2) throw std::invalid_argument("XrdSimConfig: n_points < 2");
}

ScatteringTable ScatteringTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scattering table: " + path);
  ScatteringTable t;
  t.coeffs_.resize(kMaxAtomicNumber);
  std::vector<bool> seen(kMaxAtomicNumber, false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int z;
    Coeffs c{};
    if (!(ss >> z >> c.a[0] >> c.a[1] >> c.a[2] >> c.a[3] >> c.b[0] >> c.b[1] >>
          c.b[2] >> c.b[3] >> c.c))
      throw std::runtime_error("malformed scattering table line: " + line);
    if (z < 1 || z > kMaxAtomicNumber)
      throw std::runtime_error("scattering table Z out of range: " +
                               std::to_string(z));
    t.coeffs_[z - 1] = c;
    seen[z - 1] = true;
  }
  for (int z = 1; z <= kMaxAtomicNumber; ++z)
    if (!seen[z - 1])
      throw std::runtime_error("scattering table missing Z=" + std::to_string(z));
  t.verify();
  return t;
}

double ScatteringTable::form_factor(int z, double s) const {
  if (z < 1 || z > kMaxAtomicNumber)
    throw std::invalid_argument("scattering table has no element Z=" +
                                std::to_string(z));
  const Coeffs& c = coeffs_[z - 1];
  const double s2 = s * s;
  double f = c.c;
  for (int i = 0; i < 4; ++i) f += c.a[i] * std::exp(-c.b[i] * s2);
  return f;
}

void ScatteringTable::verify() const {
  for (int z = 1; z <= kMaxAtomicNumber; ++z) {
    const double f0 = form_factor(z, 0.0);
    if (std::abs(f0 - z) > 0.02 * z)
      throw std::runtime_error("scattering table self-check failed: f(0)=" +
                               std::to_string(f0) + " for Z=" +
                               std::to_string(z));
  }
}

const ScatteringTable& default_scattering_table() {
  static const ScatteringTable table =
      ScatteringTable::load(default_data_dir() + "/scattering_factors.txt");
  return table;
}

std::vector<Reflection> enumerate_reflections(const Lattice& lattice,
                                              const XrdSimConfig& config) {
  lattice.validate();
  config.validate();
  const double sin_max = std::sin(0.5 * config.two_theta_max * kDegToRad);
  const double q_max = 2.0 * sin_max / config.wavelength;  // max 1/d

  // h = g . a_vec for g = h a* + k b* + l c*, so |h| <= q_max * a, etc.
  const int hmax = static_cast<int>(std::ceil(q_max * lattice.a));
  const int kmax = static_cast<int>(std::ceil(q_max * lattice.b));
  const int lmax = static_cast<int>(std::ceil(q_max * lattice.c));

  std::vector<Reflection> out;
  for (int h = -hmax; h <= hmax; ++h)
    for (int k = -kmax; k <= kmax; ++k)
      for (int l = -lmax; l <= lmax; ++l) {
        if (h == 0 && k == 0 && l == 0) continue;
        const double d = d_spacing(lattice, {h, k, l});
        const double sin_theta = config.wavelength / (2.0 * d);
        if (sin_theta > sin_max) continue;
        const double two_theta = 2.0 * std::asin(sin_theta) / kDegToRad;
        if (two_theta < config.two_theta_min) continue;
        out.push_back({{h, k, l}, two_theta});
      }
  return out;
}

double structure_factor_sq(const CrystalStructure& structure,
                           const std::array<int, 3>& hkl,
                           const ScatteringTable& table, bool approximate) {
  if (hkl[0] == 0 && hkl[1] == 0 && hkl[2] == 0)
    throw std::invalid_argument("structure_factor_sq: hkl must be nonzero");
  const double s = 0.5 / d_spacing(structure.lattice, hkl);
  double re = 0.0, im = 0.0;
  for (std::size_t j = 0; j < structure.num_atoms(); ++j) {
    const double f = approximate
                         ? static_cast<double>(structure.species[j])
                         : table.form_factor(structure.species[j], s);
    const double phase =
        2.0 * std::numbers::pi *
        (hkl[0] * structure.frac_coords[j][0] +
         hkl[1] * structure.frac_coords[j][1] +
         hkl[2] * structure.frac_coords[j][2]);
    re += f * std::cos(phase);
    im += f * std::sin(phase);
  }
  return re * re + im * im;
}

StickPattern simulate_sticks(const CrystalStructure& structure,
                             const XrdSimConfig& config,
                             const ScatteringTable& table) {
  structure.validate();
  auto reflections = enumerate_reflections(structure.lattice, config);
  struct Contribution {
    double two_theta, intensity;
  };
  std::vector<Contribution> contribs;
  contribs.reserve(reflections.size());
  for (const auto& refl : reflections) {
    const double theta = 0.5 * refl.two_theta * kDegToRad;
    const double cos2t = std::cos(2.0 * theta);
    const double lp =
        (1.0 + cos2t * cos2t) / (std::sin(theta) * std::sin(theta) * std::cos(theta));
    const double f2 = structure_factor_sq(structure, refl.hkl, table,
                                          config.approximate_form_factors);
    contribs.push_back({refl.two_theta, f2 * lp});
  }
  std::sort(contribs.begin(), contribs.end(),
            [](const Contribution& a, const Contribution& b) {
              return a.two_theta < b.two_theta;
            });

  // merge contributions closer than the tolerance (absorbs multiplicity)
  StickPattern sticks;
  for (const auto& c : contribs) {
    if (!sticks.empty() && c.two_theta - sticks.back().two_theta < kMergeTolDeg)
      sticks.back().intensity += c.intensity;
    else
      sticks.push_back({c.two_theta, c.intensity});
  }
  double max_i = 0.0;
  for (const auto& s : sticks) max_i = std::max(max_i, s.intensity);
  if (max_i > 0.0) {
    std::erase_if(sticks, [&](const Stick& s) {
      return s.intensity < kIntensityFloor * max_i;
    });
  } else {
    sticks.clear();
  }
  return sticks;
}

XrdPattern smear(const StickPattern& sticks, const XrdSimConfig& config) {
  config.validate();
  XrdPattern pattern;
  pattern.intensities.assign(config.n_points, 0.0);
  const double inv_two_sigma_sq = 1.0 / (2.0 * config.sigma * config.sigma);
  for (int i = 0; i < config.n_points; ++i) {
    const double g = config.grid_point(i);
    double v = 0.0;
    for (const auto& s : sticks) {
      const double dg = g - s.two_theta;
      v += s.intensity * std::exp(-dg * dg * inv_two_sigma_sq);
    }
    pattern.intensities[i] = v;
  }
  const double max_i =
      *std::max_element(pattern.intensities.begin(), pattern.intensities.end());
  if (max_i > 0.0)
    for (double& v : pattern.intensities) v *= 100.0 / max_i;
  return pattern;
}

XrdPattern simulate_pattern(const CrystalStructure& structure,
                            const XrdSimConfig& config,
                            const ScatteringTable& table) {
  return smear(simulate_sticks(structure, config, table), config);
}

}  // namespace matmodal
