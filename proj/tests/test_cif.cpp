#include <doctest.h>

#include "matmodal/cif.hpp"

using namespace matmodal;

namespace {
const char* kNaClCif = R"(data_nacl
_cell_length_a 5.64
_cell_length_b 5.64
_cell_length_c 5.64
_cell_angle_alpha 90
_cell_angle_beta 90
_cell_angle_gamma 90
loop_
_atom_site_type_symbol
_atom_site_fract_x
_atom_site_fract_y
_atom_site_fract_z
Na 0.0 0.0 0.0
Cl 0.5 0.5 0.5
)";
}  // namespace

TEST_CASE("minimal P1 cell parses") {
  const CrystalStructure s = parse_cif_p1(kNaClCif);
  CHECK(s.lattice.a == doctest::Approx(5.64));
  CHECK(s.lattice.b == doctest::Approx(5.64));
  CHECK(s.lattice.c == doctest::Approx(5.64));
  CHECK(s.lattice.gamma == doctest::Approx(90.0));
  REQUIRE(s.species.size() == 2);
  CHECK(s.species[0] == 11);
  CHECK(s.species[1] == 17);
  CHECK(s.frac_coords[1][0] == doctest::Approx(0.5));
}

TEST_CASE("coordinates wrap into [0,1)") {
  std::string text = kNaClCif;
  const auto pos = text.find("Cl 0.5 0.5 0.5");
  text.replace(pos, 14, "Cl 1.25 -0.25 0.5");
  const CrystalStructure s = parse_cif_p1(text);
  CHECK(s.frac_coords[1][0] == doctest::Approx(0.25));
  CHECK(s.frac_coords[1][1] == doctest::Approx(0.75));
}

TEST_CASE("uncertainty suffixes are stripped") {
  std::string text = kNaClCif;
  const auto pos = text.find("_cell_length_a 5.64");
  text.replace(pos, 19, "_cell_length_a 5.64(3)");
  const CrystalStructure s = parse_cif_p1(text);
  CHECK(s.lattice.a == doctest::Approx(5.64));
}

TEST_CASE("oxidation-state suffixes normalize") {
  std::string text = kNaClCif;
  auto pos = text.find("Na 0.0");
  text.replace(pos, 2, "Na1+");
  pos = text.find("Cl 0.5");
  text.replace(pos, 2, "cl1-");
  const CrystalStructure s = parse_cif_p1(text);
  CHECK(s.species[0] == 11);
  CHECK(s.species[1] == 17);
}

TEST_CASE("declared space group other than P1 is rejected") {
  std::string text = kNaClCif;
  text += "_space_group_IT_number 225\n";
  CHECK_THROWS(parse_cif_p1(text));
  // space group 1 stays accepted
  std::string p1 = kNaClCif;
  p1 += "_space_group_IT_number 1\n";
  CHECK_NOTHROW(parse_cif_p1(p1));
}

TEST_CASE("non-identity symmetry operations are rejected") {
  std::string text = kNaClCif;
  text +=
      "loop_\n_symmetry_equiv_pos_as_xyz\n'x, y, z'\n'-x, -y, -z'\n";
  CHECK_THROWS(parse_cif_p1(text));
  std::string identity_only = kNaClCif;
  identity_only += "loop_\n_symmetry_equiv_pos_as_xyz\n'x, y, z'\n";
  CHECK_NOTHROW(parse_cif_p1(identity_only));
}

TEST_CASE("missing tags produce explicit errors") {
  std::string text = kNaClCif;
  const auto pos = text.find("_cell_length_c 5.64\n");
  text.erase(pos, 20);
  try {
    parse_cif_p1(text);
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("_cell_length_c") != std::string::npos);
  }
}

TEST_CASE("unknown element symbols produce errors") {
  std::string text = kNaClCif;
  const auto pos = text.find("Na 0.0");
  text.replace(pos, 2, "Qq");
  CHECK_THROWS(parse_cif_p1(text));
}
