#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "matmodal/crystal.hpp"

namespace matmodal {

struct GraphEdge {
  std::size_t src = 0, dst = 0;
  double distance = 0.0;             // Angstrom, in (0, cutoff]
  std::array<int, 3> image{0, 0, 0};  // periodic image offset of dst
};

struct StructureGraph {
  std::vector<int> node_species;
  std::vector<GraphEdge> edges;  // every (i,j,d,m) has a mirror (j,i,d,-m)
};

// Periodic radius graph via supercell expansion. If an atom has more than
// max_neighbors candidates the nearest are kept, ties broken by
// lexicographic (dst, image) order; the result is then symmetrized so the
// reverse-edge invariant holds. Self-edges to periodic images of the same
// atom are allowed (distance > 0 enforced).
StructureGraph build_radius_graph(const CrystalStructure& structure,
                                  double cutoff = 5.0,
                                  std::size_t max_neighbors = 12);

}  // namespace matmodal
