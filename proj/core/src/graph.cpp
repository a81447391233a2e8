#include "matmodal/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <tuple>

namespace matmodal {

StructureGraph build_radius_graph(const CrystalStructure& structure,
                                  double cutoff, std::size_t max_neighbors) {
  structure.validate();
  if (!(cutoff > 0.0)) throw std::invalid_argument("build_radius_graph: cutoff <= 0");
  if (max_neighbors < 1)
    throw std::invalid_argument("build_radius_graph: max_neighbors < 1");

  const Mat3 m = lattice_matrix(structure.lattice);
  const double volume = cell_volume(structure.lattice);

  // perpendicular width along direction i: V / |a_j x a_k|
  int reps[3];
  for (int i = 0; i < 3; ++i) {
    const auto& u = m[(i + 1) % 3];
    const auto& v = m[(i + 2) % 3];
    const double cx = u[1] * v[2] - u[2] * v[1];
    const double cy = u[2] * v[0] - u[0] * v[2];
    const double cz = u[0] * v[1] - u[1] * v[0];
    const double width = volume / std::sqrt(cx * cx + cy * cy + cz * cz);
    reps[i] = static_cast<int>(std::ceil(cutoff / width));
  }

  const std::size_t n = structure.num_atoms();
  std::vector<Vec3> cart(n);
  for (std::size_t i = 0; i < n; ++i)
    cart[i] = frac_to_cart(structure.lattice, structure.frac_coords[i]);

  struct Candidate {
    double d;
    std::size_t dst;
    std::array<int, 3> image;
  };

  std::set<std::tuple<std::size_t, std::size_t, int, int, int>> kept;
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < n; ++i) {
    cands.clear();
    for (std::size_t j = 0; j < n; ++j)
      for (int ma = -reps[0]; ma <= reps[0]; ++ma)
        for (int mb = -reps[1]; mb <= reps[1]; ++mb)
          for (int mc = -reps[2]; mc <= reps[2]; ++mc) {
            if (i == j && ma == 0 && mb == 0 && mc == 0) continue;
            double dx = 0, dy = 0, dz = 0;
            dx = cart[j][0] + ma * m[0][0] + mb * m[1][0] + mc * m[2][0] - cart[i][0];
            dy = cart[j][1] + ma * m[0][1] + mb * m[1][1] + mc * m[2][1] - cart[i][1];
            dz = cart[j][2] + ma * m[0][2] + mb * m[1][2] + mc * m[2][2] - cart[i][2];
            const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
            if (d > 0.0 && d <= cutoff) cands.push_back({d, j, {ma, mb, mc}});
          }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return std::tie(a.d, a.dst, a.image) < std::tie(b.d, b.dst, b.image);
    });
    if (cands.size() > max_neighbors) cands.resize(max_neighbors);
    for (const auto& c : cands)
      kept.insert({i, c.dst, c.image[0], c.image[1], c.image[2]});
  }

  // symmetrize: add the mirror of every kept edge
  auto mirrored = kept;
  for (const auto& [src, dst, a, b, c] : kept)
    mirrored.insert({dst, src, -a, -b, -c});

  StructureGraph g;
  g.node_species = structure.species;
  for (const auto& [src, dst, ma, mb, mc] : mirrored) {
    double dx = cart[dst][0] + ma * m[0][0] + mb * m[1][0] + mc * m[2][0] - cart[src][0];
    double dy = cart[dst][1] + ma * m[0][1] + mb * m[1][1] + mc * m[2][1] - cart[src][1];
    double dz = cart[dst][2] + ma * m[0][2] + mb * m[1][2] + mc * m[2][2] - cart[src][2];
    g.edges.push_back({src, dst, std::sqrt(dx * dx + dy * dy + dz * dz),
                       {ma, mb, mc}});
  }
  return g;
}

}  // namespace matmodal
