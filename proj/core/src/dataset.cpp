#include "matmodal/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "matmodal/rng.hpp"
#include <json.hpp>

namespace matmodal {

using nlohmann::json;

void SplitSpec::validate() const {
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw std::invalid_argument("SplitSpec: negative ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("SplitSpec: ratios must sum to 1");
}

std::string record_to_json_line(const DatasetRecord& rec) {
  json j;
  j["id"] = rec.id;
  j["lattice"] = {rec.structure.lattice.a,     rec.structure.lattice.b,
                  rec.structure.lattice.c,     rec.structure.lattice.alpha,
                  rec.structure.lattice.beta,  rec.structure.lattice.gamma};
  j["species"] = rec.structure.species;
  json coords = json::array();
  for (const auto& f : rec.structure.frac_coords)
    coords.push_back({f[0], f[1], f[2]});
  j["frac_coords"] = coords;
  if (rec.formation_energy) j["formation_energy"] = *rec.formation_energy;
  if (rec.crystal_system)
    j["crystal_system"] = crystal_system_name(*rec.crystal_system);
  return j.dump();
}

DatasetRecord record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  DatasetRecord rec;
  rec.id = j.at("id").get<std::string>();
  if (rec.id.empty()) throw std::invalid_argument("record id is empty");
  const auto& lat = j.at("lattice");
  if (lat.size() != 6)
    throw std::invalid_argument("lattice must have 6 entries");
  rec.structure.lattice = {lat[0], lat[1], lat[2], lat[3], lat[4], lat[5]};
  rec.structure.species = j.at("species").get<std::vector<int>>();
  for (const auto& f : j.at("frac_coords")) {
    if (f.size() != 3)
      throw std::invalid_argument("frac_coords entries must have 3 components");
    rec.structure.frac_coords.push_back(
        {wrap_frac(f[0]), wrap_frac(f[1]), wrap_frac(f[2])});
  }
  if (j.contains("formation_energy"))
    rec.formation_energy = j.at("formation_energy").get<double>();
  if (j.contains("crystal_system"))
    rec.crystal_system =
        crystal_system_from_name(j.at("crystal_system").get<std::string>());
  rec.structure.validate();
  return rec;
}

std::vector<DatasetRecord> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::vector<DatasetRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json_line(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
    if (!ids.insert(records.back().id).second)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": duplicate record id '" + records.back().id +
                               "'");
  }
  return records;
}

void write_jsonl(const std::vector<DatasetRecord>& records,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& rec : records) out << record_to_json_line(rec) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

SplitIndices split(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("split: empty dataset");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(spec.seed);
  rng.shuffle(idx);
  const auto n1 = static_cast<std::size_t>(std::floor(spec.ratios[0] * n));
  const auto n2 = static_cast<std::size_t>(
      std::floor((spec.ratios[0] + spec.ratios[1]) * n));
  SplitIndices out;
  out.train.assign(idx.begin(), idx.begin() + n1);
  out.val.assign(idx.begin() + n1, idx.begin() + n2);
  out.test.assign(idx.begin() + n2, idx.end());
  return out;
}

namespace {

const std::string kFamilyNames[kNumPrototypeFamilies] = {
    "rock_salt",          "cesium_chloride",   "rutile",
    "distorted_perovskite", "wurtzite",        "rhombohedral_binary",
    "monoclinic_binary",  "triclinic_binary"};

const CrystalSystem kFamilySystems[kNumPrototypeFamilies] = {
    CrystalSystem::kCubic,       CrystalSystem::kCubic,
    CrystalSystem::kTetragonal,  CrystalSystem::kOrthorhombic,
    CrystalSystem::kHexagonal,   CrystalSystem::kTrigonal,
    CrystalSystem::kMonoclinic,  CrystalSystem::kTriclinic};

// Seven-system training ratios targeted by the default family weights
// (cubic split 60/40 between rock salt and cesium chloride).
const double kFamilyWeights[kNumPrototypeFamilies] = {
    0.6 * 22.9, 0.4 * 22.9, 16.7, 16.7, 19.4, 11.3, 15.0, 4.2};

// 14 cation-like + 6 anion-like species; every A/B pair draws A from the
// first list and B from the second.
const int kCationPool[14] = {3, 11, 19, 12, 20, 38, 56, 22, 40, 26, 28, 29, 30, 13};
const int kAnionPool[6] = {8, 16, 34, 9, 17, 35};

struct Proto {
  Lattice lattice;
  std::vector<int> which;  // 0 = A, 1 = B per site
  std::vector<Vec3> sites;
};

Proto make_prototype(PrototypeFamily fam, double r, Rng& rng) {
  Proto p;
  switch (fam) {
    case PrototypeFamily::kRockSalt: {
      const double a = 2.0 * r * rng.uniform(0.95, 1.10);
      p.lattice = {a, a, a, 90, 90, 90};
      p.which = {0, 0, 0, 0, 1, 1, 1, 1};
      p.sites = {{0, 0, 0},       {0.5, 0.5, 0},   {0.5, 0, 0.5},
                 {0, 0.5, 0.5},   {0.5, 0.5, 0.5}, {0, 0, 0.5},
                 {0, 0.5, 0},     {0.5, 0, 0}};
      break;
    }
    case PrototypeFamily::kCesiumChloride: {
      const double a = 2.0 * r / std::sqrt(3.0) * rng.uniform(0.95, 1.10);
      p.lattice = {a, a, a, 90, 90, 90};
      p.which = {0, 1};
      p.sites = {{0, 0, 0}, {0.5, 0.5, 0.5}};
      break;
    }
    case PrototypeFamily::kRutile: {
      const double a = 2.2 * r * rng.uniform(0.95, 1.05);
      const double c = a * rng.uniform(0.60, 0.70);
      const double u = 0.305;
      p.lattice = {a, a, c, 90, 90, 90};
      p.which = {0, 0, 1, 1, 1, 1};
      p.sites = {{0, 0, 0},
                 {0.5, 0.5, 0.5},
                 {u, u, 0},
                 {1 - u, 1 - u, 0},
                 {0.5 + u, 0.5 - u, 0.5},
                 {0.5 - u, 0.5 + u, 0.5}};
      break;
    }
    case PrototypeFamily::kDistortedPerovskite: {
      const double s = 1.6 * r;
      const double a = s * rng.uniform(0.90, 0.98);
      const double b = s * rng.uniform(1.00, 1.08);
      const double c = s * rng.uniform(1.12, 1.22);
      p.lattice = {a, b, c, 90, 90, 90};
      p.which = {0, 1, 1, 1, 1};
      p.sites = {{0, 0, 0},
                 {0.5, 0.5, 0.5},
                 {0.5, 0.5, 0},
                 {0.5, 0, 0.5},
                 {0, 0.5, 0.5}};
      break;
    }
    case PrototypeFamily::kWurtzite: {
      const double a = 1.65 * r * rng.uniform(0.95, 1.05);
      const double c = a * 1.633 * rng.uniform(0.98, 1.06);
      const double third = 1.0 / 3.0;
      p.lattice = {a, a, c, 90, 90, 120};
      p.which = {0, 0, 1, 1};
      p.sites = {{third, 2 * third, 0},
                 {2 * third, third, 0.5},
                 {third, 2 * third, 0.375},
                 {2 * third, third, 0.875}};
      break;
    }
    case PrototypeFamily::kRhombohedralBinary: {
      const double a = 1.2 * r * rng.uniform(1.00, 1.15);
      // keep the angle away from 60 deg: at exactly 60 this two-site cell is
      // the rock-salt primitive cell, i.e. metrically cubic
      const double ang = rng.uniform(66.0, 80.0);
      p.lattice = {a, a, a, ang, ang, ang};
      p.which = {0, 1};
      p.sites = {{0, 0, 0}, {0.5, 0.5, 0.5}};
      break;
    }
    case PrototypeFamily::kMonoclinicBinary: {
      const double s = 1.5 * r;
      const double a = s * rng.uniform(0.90, 0.98);
      const double b = s * rng.uniform(1.00, 1.08);
      const double c = s * rng.uniform(1.12, 1.22);
      const double beta = rng.uniform(95.0, 115.0);
      p.lattice = {a, b, c, 90, beta, 90};
      p.which = {0, 1};
      p.sites = {{0, 0, 0}, {0.5, 0.5, 0.5}};
      break;
    }
    case PrototypeFamily::kTriclinicBinary: {
      const double s = 1.5 * r;
      const double a = s * rng.uniform(0.90, 0.98);
      const double b = s * rng.uniform(1.00, 1.08);
      const double c = s * rng.uniform(1.12, 1.22);
      const double alpha = rng.uniform(80.0, 87.0);
      const double beta = rng.uniform(93.0, 99.0);
      const double gamma = rng.uniform(101.0, 108.0);
      p.lattice = {a, b, c, alpha, beta, gamma};
      p.which = {0, 1};
      p.sites = {{0, 0, 0}, {0.4, 0.3, 0.6}};
      break;
    }
  }
  return p;
}

}  // namespace

const std::string& prototype_family_name(PrototypeFamily f) {
  return kFamilyNames[static_cast<int>(f)];
}

CrystalSystem prototype_family_system(PrototypeFamily f) {
  return kFamilySystems[static_cast<int>(f)];
}

std::vector<DatasetRecord> synth_generate(
    std::size_t n, std::uint64_t seed,
    const std::vector<PrototypeFamily>& families, const ElementTable& table) {
  if (n == 0) throw std::invalid_argument("synth_generate: n must be positive");
  std::vector<PrototypeFamily> fams = families;
  if (fams.empty())
    for (int i = 0; i < kNumPrototypeFamilies; ++i)
      fams.push_back(static_cast<PrototypeFamily>(i));

  // Deterministic per-family quotas (largest remainder), then shuffled, so
  // family frequencies track the target weights exactly.
  double wsum = 0.0;
  for (auto f : fams) wsum += kFamilyWeights[static_cast<int>(f)];
  std::vector<PrototypeFamily> assignment;
  assignment.reserve(n);
  std::vector<std::pair<double, std::size_t>> remainders;
  for (std::size_t i = 0; i < fams.size(); ++i) {
    const double exact = n * kFamilyWeights[static_cast<int>(fams[i])] / wsum;
    const auto base = static_cast<std::size_t>(std::floor(exact));
    assignment.insert(assignment.end(), base, fams[i]);
    remainders.push_back({-(exact - base), i});
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t k = 0; assignment.size() < n; ++k)
    assignment.push_back(fams[remainders[k % remainders.size()].second]);

  Rng rng(seed);
  rng.shuffle(assignment);

  std::vector<DatasetRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PrototypeFamily fam = assignment[i];
    const int za = kCationPool[rng.next_below(14)];
    const int zb = kAnionPool[rng.next_below(6)];
    const double r =
        table.covalent_radius_angstrom(za) + table.covalent_radius_angstrom(zb);
    const Proto proto = make_prototype(fam, r, rng);

    DatasetRecord rec;
    std::ostringstream id;
    id << "synth-" << std::setw(6) << std::setfill('0') << i;
    rec.id = id.str();
    rec.structure.lattice = proto.lattice;
    for (std::size_t s = 0; s < proto.sites.size(); ++s) {
      rec.structure.species.push_back(proto.which[s] == 0 ? za : zb);
      rec.structure.frac_coords.push_back({wrap_frac(proto.sites[s][0]),
                                           wrap_frac(proto.sites[s][1]),
                                           wrap_frac(proto.sites[s][2])});
    }
    rec.crystal_system = prototype_family_system(fam);

    // formation-energy surrogate (see header)
    const Composition comp = composition_of(rec.structure);
    double total = 0.0, mean_en = 0.0;
    for (const auto& [z, amt] : comp.amounts) total += amt;
    for (const auto& [z, amt] : comp.amounts)
      mean_en += (amt / total) * table.electronegativity(z);
    double spread = 0.0;
    for (const auto& [z, amt] : comp.amounts)
      spread +=
          (amt / total) * std::abs(table.electronegativity(z) - mean_en);
    const double vol_per_atom =
        cell_volume(rec.structure.lattice) / rec.structure.num_atoms();
    rec.formation_energy = -0.5 * spread + 0.02 * (vol_per_atom - 15.0) +
                           rng.normal(0.0, 0.01);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace matmodal
