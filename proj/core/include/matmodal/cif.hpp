#pragma once

#include <string>

#include "matmodal/crystal.hpp"
#include "matmodal/elements.hpp"

namespace matmodal {

// Minimal CIF reader for P1 cells: requires _cell_length_a/b/c,
// _cell_angle_alpha/beta/gamma and a loop_ with _atom_site_type_symbol and
// _atom_site_fract_x/y/z. Any symmetry beyond the identity is rejected.
// Coordinates are wrapped into [0,1); symbols like "fe3+" normalize to Fe.
CrystalStructure parse_cif_p1(const std::string& text,
                              const ElementTable& table = default_element_table());

}  // namespace matmodal
