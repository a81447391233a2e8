#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "matmodal/crystal.hpp"
#include "matmodal/elements.hpp"

namespace matmodal {

struct DatasetRecord {
  std::string id;
  CrystalStructure structure;
  std::optional<double> formation_energy;  // eV/atom
  std::optional<CrystalSystem> crystal_system;

  // Explicit label when present, metric classification otherwise.
  CrystalSystem system_label() const {
    return crystal_system ? *crystal_system
                          : classify_crystal_system(structure.lattice);
  }
};

struct SplitSpec {
  double ratios[3] = {0.6, 0.2, 0.2};
  std::uint64_t seed = 0;

  void validate() const;
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// JSONL schema, one object per line:
//   {"id", "lattice":[a,b,c,alpha,beta,gamma], "species":[Z...],
//    "frac_coords":[[x,y,z]...], "formation_energy"?, "crystal_system"?}
std::vector<DatasetRecord> load_jsonl(const std::string& path);
void write_jsonl(const std::vector<DatasetRecord>& records,
                 const std::string& path);

std::string record_to_json_line(const DatasetRecord& rec);
DatasetRecord record_from_json_line(const std::string& line);

// Seeded Fisher-Yates shuffle cut at floor(r1*n) and floor((r1+r2)*n).
SplitIndices split(std::size_t n, const SplitSpec& spec);

enum class PrototypeFamily : int {
  kRockSalt = 0,          // cubic
  kCesiumChloride = 1,    // cubic
  kRutile = 2,            // tetragonal
  kDistortedPerovskite = 3,  // orthorhombic
  kWurtzite = 4,          // hexagonal
  kRhombohedralBinary = 5,   // trigonal
  kMonoclinicBinary = 6,  // monoclinic
  kTriclinicBinary = 7,   // triclinic
};
constexpr int kNumPrototypeFamilies = 8;

const std::string& prototype_family_name(PrototypeFamily f);
CrystalSystem prototype_family_system(PrototypeFamily f);

// Synthetic binary-compound dataset built from prototype templates. Family
// weights default to the seven-system training ratios this project targets
// (cubic weight shared between the two cubic families); lattice parameters
// scale with the covalent radii of the sampled element pair. The formation
// energy label is the documented surrogate
//   E_f = -0.5 * dchi_w + 0.02 * (V / n_atoms - 15) + eps,
// eps ~ N(0, 0.01^2), with dchi_w the stoichiometry-weighted
// electronegativity spread (same statistic the featurizer calls weighted
// average deviation).
std::vector<DatasetRecord> synth_generate(
    std::size_t n, std::uint64_t seed,
    const std::vector<PrototypeFamily>& families = {},  // empty = all
    const ElementTable& table = default_element_table());

}  // namespace matmodal
