#include <algorithm>
#include <cmath>
#include <doctest.h>

#include "matmodal/rng.hpp"
#include "matmodal/xrd.hpp"

using namespace matmodal;

namespace {

CrystalStructure simple_cubic_po() {
  CrystalStructure s;
  s.lattice = {3.35, 3.35, 3.35, 90, 90, 90};
  s.species = {84};
  s.frac_coords = {{0, 0, 0}};
  return s;
}

CrystalStructure fcc_cu() {
  CrystalStructure s;
  s.lattice = {3.615, 3.615, 3.615, 90, 90, 90};
  s.species = {29, 29, 29, 29};
  s.frac_coords = {{0, 0, 0}, {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}};
  return s;
}

CrystalStructure rock_salt_nacl() {
  CrystalStructure s;
  s.lattice = {5.64, 5.64, 5.64, 90, 90, 90};
  s.species = {11, 11, 11, 11, 17, 17, 17, 17};
  s.frac_coords = {{0, 0, 0},     {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0},
                   {0.5, 0.5, 0.5}, {0.5, 0, 0},   {0, 0.5, 0},   {0, 0, 0.5}};
  return s;
}

CrystalStructure random_structure(Rng& rng) {
  CrystalStructure s;
  while (true) {
    s.lattice = {rng.uniform(3.0, 8.0),   rng.uniform(3.0, 8.0),
                 rng.uniform(3.0, 8.0),   rng.uniform(75.0, 105.0),
                 rng.uniform(75.0, 105.0), rng.uniform(75.0, 105.0)};
    try {
      s.lattice.validate();
      cell_volume(s.lattice);
      break;
    } catch (const std::exception&) {
    }
  }
  const std::size_t n = 1 + rng.next_below(4);
  s.species.clear();
  s.frac_coords.clear();
  for (std::size_t i = 0; i < n; ++i) {
    s.species.push_back(1 + static_cast<int>(rng.next_below(90)));
    s.frac_coords.push_back({rng.uniform(), rng.uniform(), rng.uniform()});
  }
  return s;
}

}  // namespace

TEST_CASE("scattering table self-check passes") {
  CHECK_NOTHROW(default_scattering_table().verify());
}

TEST_CASE("reflection enumeration hits hand Bragg angles") {
  XrdSimConfig cfg;
  const auto refl = enumerate_reflections(simple_cubic_po().lattice, cfg);
  bool found_100 = false;
  for (const auto& r : refl) {
    if (r.hkl == std::array<int, 3>{1, 0, 0}) {
      found_100 = true;
      CHECK(r.two_theta == doctest::Approx(26.58).epsilon(0.01 / 26.58));
    }
    // Friedel partner enumerated too
    const std::array<int, 3> neg{-r.hkl[0], -r.hkl[1], -r.hkl[2]};
    CHECK(std::any_of(refl.begin(), refl.end(),
                      [&](const Reflection& q) { return q.hkl == neg; }));
  }
  CHECK(found_100);
}

TEST_CASE("no reflections when wavelength exceeds the Bragg limit") {
  XrdSimConfig cfg;
  cfg.wavelength = 12.0;  // > 2 * d_max for a 3.35 A cell
  CHECK(enumerate_reflections(simple_cubic_po().lattice, cfg).empty());
}

TEST_CASE("structure factor basics") {
  const ScatteringTable& table = default_scattering_table();
  // single atom at origin: |F|^2 = f^2
  const CrystalStructure po = simple_cubic_po();
  const double d = d_spacing(po.lattice, {1, 0, 0});
  const double f = table.form_factor(84, 1.0 / (2.0 * d));
  CHECK(structure_factor_sq(po, {1, 0, 0}, table) ==
        doctest::Approx(f * f).epsilon(1e-9));

  // FCC mixed-parity extinction
  CHECK(structure_factor_sq(fcc_cu(), {1, 0, 0}, table) < 1e-8);
  CHECK(structure_factor_sq(fcc_cu(), {1, 1, 1}, table) > 1.0);

  // rock salt: (200)-type sum beats (111)-type difference
  const CrystalStructure nacl = rock_salt_nacl();
  CHECK(structure_factor_sq(nacl, {2, 0, 0}, table) >
        structure_factor_sq(nacl, {1, 1, 1}, table));
}

TEST_CASE("simple cubic stick positions") {
  XrdSimConfig cfg;
  const StickPattern sticks =
      simulate_sticks(simple_cubic_po(), cfg, default_scattering_table());
  REQUIRE(sticks.size() >= 3);
  CHECK(sticks[0].two_theta == doctest::Approx(26.58).epsilon(0.02 / 26.58));
  CHECK(sticks[1].two_theta == doctest::Approx(37.95).epsilon(0.02 / 37.95));
  CHECK(sticks[2].two_theta == doctest::Approx(46.94).epsilon(0.02 / 46.94));
  for (std::size_t i = 1; i < sticks.size(); ++i)
    CHECK(sticks[i].two_theta > sticks[i - 1].two_theta + 0.01 - 1e-12);
}

TEST_CASE("FCC extinction leaves no stick at the (100) position") {
  XrdSimConfig cfg;
  const StickPattern sticks =
      simulate_sticks(fcc_cu(), cfg, default_scattering_table());
  const double d100 = d_spacing(fcc_cu().lattice, {1, 0, 0});
  const double tt100 =
      2.0 * std::asin(cfg.wavelength / (2.0 * d100)) * 180.0 / M_PI;
  for (const auto& s : sticks) CHECK(std::abs(s.two_theta - tt100) > 0.5);
}

TEST_CASE("smearing") {
  XrdSimConfig cfg;
  SUBCASE("single stick normalizes to 100 at its position") {
    const XrdPattern p = smear({{30.0, 42.0}}, cfg);
    REQUIRE(static_cast<int>(p.intensities.size()) == cfg.n_points);
    const auto it =
        std::max_element(p.intensities.begin(), p.intensities.end());
    CHECK(*it == doctest::Approx(100.0));
    const int arg = static_cast<int>(it - p.intensities.begin());
    CHECK(cfg.grid_point(arg) == doctest::Approx(30.0));
    // one sigma away on the grid
    CHECK(p.intensities[arg + 3] ==
          doctest::Approx(100.0 * std::exp(-0.5)).epsilon(1e-6));
  }
  SUBCASE("two distant equal sticks both reach 100") {
    const XrdPattern p = smear({{20.0, 7.0}, {70.0, 7.0}}, cfg);
    const int i20 = static_cast<int>(std::lround((20.0 - cfg.two_theta_min) /
                                                 cfg.grid_step()));
    const int i70 = static_cast<int>(std::lround((70.0 - cfg.two_theta_min) /
                                                 cfg.grid_step()));
    CHECK(p.intensities[i20] == doctest::Approx(100.0).epsilon(1e-10));
    CHECK(p.intensities[i70] == doctest::Approx(100.0).epsilon(1e-10));
  }
  SUBCASE("empty stick list gives the all-zero pattern") {
    const XrdPattern p = smear({}, cfg);
    for (double v : p.intensities) CHECK(v == 0.0);
  }
}

TEST_CASE("pattern bounds and normalization") {
  XrdSimConfig cfg;
  const XrdPattern p =
      simulate_pattern(rock_salt_nacl(), cfg, default_scattering_table());
  double mx = 0.0;
  for (double v : p.intensities) {
    CHECK(v >= 0.0);
    CHECK(v <= 100.0 + 1e-9);
    mx = std::max(mx, v);
  }
  CHECK(mx == doctest::Approx(100.0));
}

TEST_CASE("NaCl strongest peak sits at the (200) position") {
  XrdSimConfig cfg;
  const XrdPattern p =
      simulate_pattern(rock_salt_nacl(), cfg, default_scattering_table());
  const auto it = std::max_element(p.intensities.begin(), p.intensities.end());
  const double peak = cfg.grid_point(static_cast<int>(it - p.intensities.begin()));
  CHECK(peak == doctest::Approx(31.7).epsilon(0.1 / 31.7));
}

TEST_CASE("pattern invariant under atom permutation and rigid translation") {
  Rng rng(31);
  XrdSimConfig cfg;
  const ScatteringTable& table = default_scattering_table();
  for (int t = 0; t < 10; ++t) {
    CrystalStructure s = random_structure(rng);
    const XrdPattern base = simulate_pattern(s, cfg, table);

    CrystalStructure permuted = s;
    std::reverse(permuted.species.begin(), permuted.species.end());
    std::reverse(permuted.frac_coords.begin(), permuted.frac_coords.end());
    const XrdPattern perm = simulate_pattern(permuted, cfg, table);

    CrystalStructure shifted = s;
    const Vec3 shift{rng.uniform(), rng.uniform(), rng.uniform()};
    for (auto& fc : shifted.frac_coords)
      for (int k = 0; k < 3; ++k) fc[k] = wrap_frac(fc[k] + shift[k]);
    const XrdPattern trans = simulate_pattern(shifted, cfg, table);

    for (std::size_t i = 0; i < base.intensities.size(); ++i) {
      CHECK(std::abs(perm.intensities[i] - base.intensities[i]) <=
            1e-8 * 100.0);
      CHECK(std::abs(trans.intensities[i] - base.intensities[i]) <=
            1e-8 * 100.0);
    }
  }
}

TEST_CASE("peaks move to lower angles under lattice dilation") {
  Rng rng(77);
  XrdSimConfig cfg;
  const ScatteringTable& table = default_scattering_table();
  for (int t = 0; t < 100; ++t) {
    CrystalStructure s = random_structure(rng);
    const StickPattern base = simulate_sticks(s, cfg, table);
    if (base.empty()) continue;
    for (double factor : {1.01, 1.05}) {
      CrystalStructure bigger = s;
      bigger.lattice.a *= factor;
      bigger.lattice.b *= factor;
      bigger.lattice.c *= factor;
      const StickPattern moved = simulate_sticks(bigger, cfg, table);
      REQUIRE(!moved.empty());
      CHECK(moved[0].two_theta < base[0].two_theta);
    }
  }
}

TEST_CASE("determinism") {
  XrdSimConfig cfg;
  const XrdPattern a =
      simulate_pattern(rock_salt_nacl(), cfg, default_scattering_table());
  const XrdPattern b =
      simulate_pattern(rock_salt_nacl(), cfg, default_scattering_table());
  CHECK(a.intensities == b.intensities);
}

TEST_CASE("config validation") {
  XrdSimConfig cfg;
  cfg.n_points = 1;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.sigma = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.two_theta_min = 90.0;
  cfg.two_theta_max = 10.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("approximate form factors stay physical") {
  XrdSimConfig cfg;
  cfg.approximate_form_factors = true;
  const XrdPattern p =
      simulate_pattern(rock_salt_nacl(), cfg, default_scattering_table());
  double mx = 0.0;
  for (double v : p.intensities) mx = std::max(mx, v);
  CHECK(mx == doctest::Approx(100.0));
}
