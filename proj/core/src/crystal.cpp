#include "matmodal/crystal.hpp"

#include <cmath>
#include <numbers>

namespace matmodal {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;

double cosd(double deg) { return std::cos(deg * kDegToRad); }
double sind(double deg) { return std::sin(deg * kDegToRad); }

// radicand of the triclinic volume formula
double volume_radicand(const Lattice& l) {
  const double ca = cosd(l.alpha), cb = cosd(l.beta), cg = cosd(l.gamma);
  return 1.0 - ca * ca - cb * cb - cg * cg + 2.0 * ca * cb * cg;
}
}  // namespace

void Lattice::validate() const {
  if (!(a > 0.0 && b > 0.0 && c > 0.0))
    throw std::invalid_argument("Lattice: lengths must be positive");
  for (double ang : {alpha, beta, gamma})
    if (!(ang > 0.0 && ang < 180.0))
      throw std::invalid_argument("Lattice: angles must lie in (0, 180)");
  if (!(volume_radicand(*this) > 0.0))
    throw std::invalid_argument("Lattice: degenerate cell (volume radicand <= 0)");
}

const std::string& crystal_system_name(CrystalSystem s) {
  static const std::string names[kNumCrystalSystems] = {
      "cubic",      "hexagonal",  "trigonal", "tetragonal",
      "orthorhombic", "monoclinic", "triclinic"};
  return names[static_cast<int>(s)];
}

CrystalSystem crystal_system_from_name(const std::string& name) {
  for (int i = 0; i < kNumCrystalSystems; ++i)
    if (crystal_system_name(static_cast<CrystalSystem>(i)) == name)
      return static_cast<CrystalSystem>(i);
  throw std::invalid_argument("unknown crystal system: " + name);
}

void CrystalStructure::validate() const {
  lattice.validate();
  if (species.empty() || species.size() != frac_coords.size())
    throw std::invalid_argument(
        "CrystalStructure: species and frac_coords must have equal nonzero size");
  for (int z : species)
    if (z < 1 || z > kMaxAtomicNumber)
      throw std::invalid_argument("CrystalStructure: atomic number out of range 1..98: " +
                                  std::to_string(z));
  for (const auto& f : frac_coords)
    for (double x : f)
      if (!(x >= 0.0 && x < 1.0))
        throw std::invalid_argument(
            "CrystalStructure: fractional coordinate not wrapped into [0,1)");
}

void Composition::validate() const {
  if (amounts.empty())
    throw std::invalid_argument("Composition: empty");
  for (const auto& [z, amt] : amounts)
    if (!(amt > 0.0))
      throw std::invalid_argument("Composition: nonpositive amount for Z=" +
                                  std::to_string(z));
}

double wrap_frac(double x) {
  double w = x - std::floor(x);
  if (w >= 1.0) w = 0.0;  // guards x = -1e-17 rounding to 1.0
  return w;
}

Mat3 lattice_matrix(const Lattice& l) {
  const double ca = cosd(l.alpha), cb = cosd(l.beta);
  const double cg = cosd(l.gamma), sg = sind(l.gamma);
  const double v = std::sqrt(volume_radicand(l));
  return Mat3{{{l.a, 0.0, 0.0},
               {l.b * cg, l.b * sg, 0.0},
               {l.c * cb, l.c * (ca - cb * cg) / sg, l.c * v / sg}}};
}

double cell_volume(const Lattice& l) {
  const double rad = volume_radicand(l);
  if (!(rad > 0.0))
    throw std::invalid_argument("cell_volume: degenerate cell");
  return l.a * l.b * l.c * std::sqrt(rad);
}

Vec3 frac_to_cart(const Lattice& l, const Vec3& f) {
  const Mat3 m = lattice_matrix(l);
  Vec3 out{};
  for (int j = 0; j < 3; ++j)
    out[j] = f[0] * m[0][j] + f[1] * m[1][j] + f[2] * m[2][j];
  return out;
}

Vec3 cart_to_frac(const Lattice& l, const Vec3& r) {
  // the lattice matrix is lower-triangular, so back-substitute
  const Mat3 m = lattice_matrix(l);
  Vec3 f{};
  f[2] = r[2] / m[2][2];
  f[1] = (r[1] - f[2] * m[2][1]) / m[1][1];
  f[0] = (r[0] - f[1] * m[1][0] - f[2] * m[2][0]) / m[0][0];
  return f;
}

double d_spacing(const Lattice& l, const std::array<int, 3>& hkl) {
  if (hkl[0] == 0 && hkl[1] == 0 && hkl[2] == 0)
    throw std::invalid_argument("d_spacing: hkl must be nonzero");
  // direct metric tensor G, then 1/d^2 = h^T G^{-1} h
  const Mat3 m = lattice_matrix(l);
  double g[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      g[i][j] = m[i][0] * m[j][0] + m[i][1] * m[j][1] + m[i][2] * m[j][2];
  const double det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                     g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                     g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
  double inv[3][3];
  inv[0][0] = (g[1][1] * g[2][2] - g[1][2] * g[2][1]) / det;
  inv[0][1] = (g[0][2] * g[2][1] - g[0][1] * g[2][2]) / det;
  inv[0][2] = (g[0][1] * g[1][2] - g[0][2] * g[1][1]) / det;
  inv[1][0] = (g[1][2] * g[2][0] - g[1][0] * g[2][2]) / det;
  inv[1][1] = (g[0][0] * g[2][2] - g[0][2] * g[2][0]) / det;
  inv[1][2] = (g[0][2] * g[1][0] - g[0][0] * g[1][2]) / det;
  inv[2][0] = (g[1][0] * g[2][1] - g[1][1] * g[2][0]) / det;
  inv[2][1] = (g[0][1] * g[2][0] - g[0][0] * g[2][1]) / det;
  inv[2][2] = (g[0][0] * g[1][1] - g[0][1] * g[1][0]) / det;
  double inv_d2 = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      inv_d2 += hkl[i] * inv[i][j] * hkl[j];
  return 1.0 / std::sqrt(inv_d2);
}

CrystalSystem classify_crystal_system(const Lattice& l, double rel_tol,
                                      double angle_tol) {
  auto len_eq = [&](double x, double y) {
    return std::abs(x - y) <= rel_tol * std::max(x, y);
  };
  auto ang_eq = [&](double x, double y) { return std::abs(x - y) <= angle_tol; };

  const bool ab = len_eq(l.a, l.b), bc = len_eq(l.b, l.c), ac = len_eq(l.a, l.c);
  const bool a90 = ang_eq(l.alpha, 90.0), b90 = ang_eq(l.beta, 90.0),
             g90 = ang_eq(l.gamma, 90.0);
  const bool all90 = a90 && b90 && g90;

  if (ab && bc && ac && all90) return CrystalSystem::kCubic;
  if (ab && !bc && a90 && b90 && ang_eq(l.gamma, 120.0))
    return CrystalSystem::kHexagonal;
  if (ab && bc && ac && ang_eq(l.alpha, l.beta) && ang_eq(l.beta, l.gamma) &&
      !a90)
    return CrystalSystem::kTrigonal;
  if (ab && !bc && all90) return CrystalSystem::kTetragonal;
  if (all90) return CrystalSystem::kOrthorhombic;
  const int off90 = (!a90 ? 1 : 0) + (!b90 ? 1 : 0) + (!g90 ? 1 : 0);
  if (off90 == 1) return CrystalSystem::kMonoclinic;
  return CrystalSystem::kTriclinic;
}

Composition composition_of(const CrystalStructure& s) {
  s.validate();
  Composition comp;
  for (int z : s.species) comp.amounts[z] += 1.0;
  return comp;
}

}  // namespace matmodal
