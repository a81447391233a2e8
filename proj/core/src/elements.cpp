#include "matmodal/elements.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace matmodal {

ElementTable ElementTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open element table: " + path);
  ElementTable t;
  t.props_.resize(kMaxAtomicNumber);
  t.symbols_.resize(kMaxAtomicNumber);
  std::vector<bool> seen(kMaxAtomicNumber, false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int z;
    std::string sym;
    double mass, en, row, group, radius, nval, mn;
    if (!(ss >> z >> sym >> mass >> en >> row >> group >> radius >> nval >> mn))
      throw std::runtime_error("malformed element table line: " + line);
    if (z < 1 || z > kMaxAtomicNumber)
      throw std::runtime_error("element table Z out of range: " + std::to_string(z));
    t.props_[z - 1] = {static_cast<double>(z), mass, en, row, group, radius,
                       nval, mn};
    t.symbols_[z - 1] = sym;
    seen[z - 1] = true;
  }
  for (int z = 1; z <= kMaxAtomicNumber; ++z)
    if (!seen[z - 1])
      throw std::runtime_error("element table incomplete, missing Z=" +
                               std::to_string(z));
  return t;
}

void ElementTable::check_z(int z) const {
  if (z < 1 || z > kMaxAtomicNumber)
    throw std::invalid_argument("unknown element Z=" + std::to_string(z));
}

double ElementTable::property(int z, ElementProperty p) const {
  check_z(z);
  return props_[z - 1][static_cast<int>(p)];
}

const std::string& ElementTable::symbol(int z) const {
  check_z(z);
  return symbols_[z - 1];
}

int ElementTable::atomic_number(const std::string& symbol) const {
  for (int z = 1; z <= kMaxAtomicNumber; ++z)
    if (symbols_[z - 1] == symbol) return z;
  throw std::invalid_argument("unknown element symbol: " + symbol);
}

std::string default_data_dir() {
  if (const char* env = std::getenv("MATMODAL_DATA_DIR")) return env;
#ifdef MATMODAL_DATA_DIR_DEFAULT
  return MATMODAL_DATA_DIR_DEFAULT;
#else
  return "data";
#endif
}

const ElementTable& default_element_table() {
  static const ElementTable table =
      ElementTable::load(default_data_dir() + "/element_properties.txt");
  return table;
}

}  // namespace matmodal
