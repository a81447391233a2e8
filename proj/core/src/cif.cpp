#include "matmodal/cif.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace matmodal {

namespace {

std::string strip(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    // quoted values may contain spaces; good enough for our subset
    if ((tok.front() == '\'' || tok.front() == '"') &&
        (tok.size() < 2 || tok.back() != tok.front())) {
      std::string rest;
      char quote = tok.front();
      while (ss >> rest) {
        tok += " " + rest;
        if (rest.back() == quote) break;
      }
    }
    if (tok.size() >= 2 && (tok.front() == '\'' || tok.front() == '"') &&
        tok.back() == tok.front())
      tok = tok.substr(1, tok.size() - 2);
    out.push_back(tok);
  }
  return out;
}

// numeric CIF value, stripping a trailing uncertainty like 5.64(3)
double cif_number(const std::string& raw, const std::string& tag) {
  std::string s = raw;
  if (auto p = s.find('('); p != std::string::npos) s = s.substr(0, p);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("CIF: bad numeric value '" + raw + "' for " + tag);
  }
}

// "Fe3+" / "fe" / "O2-" -> canonical element symbol
std::string normalize_symbol(const std::string& raw) {
  std::string sym;
  for (char c : raw) {
    if (std::isalpha(static_cast<unsigned char>(c)))
      sym += c;
    else
      break;
  }
  if (sym.empty()) throw std::runtime_error("CIF: bad element symbol '" + raw + "'");
  sym[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(sym[0])));
  for (std::size_t i = 1; i < sym.size(); ++i)
    sym[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(sym[i])));
  return sym;
}

bool identity_symop(const std::string& op) {
  std::string s;
  for (char c : op)
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '\'' && c != '"')
      s += std::tolower(static_cast<unsigned char>(c));
  return s == "x,y,z" || s == "+x,+y,+z" || s.empty();
}

}  // namespace

CrystalStructure parse_cif_p1(const std::string& text,
                              const ElementTable& table) {
  std::map<std::string, std::string> scalars;
  std::vector<std::vector<std::string>> loops_headers;
  std::vector<std::vector<std::vector<std::string>>> loops_rows;

  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }

  for (std::size_t i = 0; i < lines.size();) {
    if (lines[i] == "loop_") {
      ++i;
      std::vector<std::string> headers;
      while (i < lines.size() && lines[i][0] == '_') headers.push_back(lines[i++]);
      std::vector<std::vector<std::string>> rows;
      while (i < lines.size() && lines[i][0] != '_' && lines[i] != "loop_" &&
             lines[i].rfind("data_", 0) != 0) {
        auto toks = tokenize(lines[i]);
        if (toks.size() != headers.size())
          throw std::runtime_error("CIF: loop row has " +
                                   std::to_string(toks.size()) + " values for " +
                                   std::to_string(headers.size()) + " columns");
        rows.push_back(std::move(toks));
        ++i;
      }
      loops_headers.push_back(std::move(headers));
      loops_rows.push_back(std::move(rows));
    } else if (lines[i][0] == '_') {
      auto toks = tokenize(lines[i]);
      if (toks.size() >= 2) {
        std::string value = toks[1];
        for (std::size_t k = 2; k < toks.size(); ++k) value += " " + toks[k];
        scalars[toks[0]] = value;
      }
      ++i;
    } else {
      ++i;  // data_ blocks and stray values
    }
  }

  // symmetry gate: explicit non-P1 space group or extra symops are rejected
  for (const auto& tag : {"_space_group_IT_number", "_symmetry_Int_Tables_number"})
    if (auto it = scalars.find(tag); it != scalars.end())
      if (cif_number(it->second, tag) != 1.0)
        throw std::runtime_error("CIF: unsupported symmetry (space group " +
                                 it->second + "), only P1 is supported");
  for (const auto& tag :
       {"_symmetry_space_group_name_H-M", "_space_group_name_H-M_alt"})
    if (auto it = scalars.find(tag); it != scalars.end()) {
      std::string v = it->second;
      v.erase(std::remove_if(v.begin(), v.end(), ::isspace), v.end());
      if (v != "P1")
        throw std::runtime_error("CIF: unsupported symmetry ('" + it->second +
                                 "'), only P1 is supported");
    }
  for (std::size_t li = 0; li < loops_headers.size(); ++li) {
    for (std::size_t col = 0; col < loops_headers[li].size(); ++col) {
      const std::string& h = loops_headers[li][col];
      if (h == "_symmetry_equiv_pos_as_xyz" ||
          h == "_space_group_symop_operation_xyz") {
        for (const auto& row : loops_rows[li])
          if (!identity_symop(row[col]))
            throw std::runtime_error(
                "CIF: unsupported symmetry (non-identity symop '" + row[col] +
                "'), only P1 is supported");
      }
    }
  }

  auto scalar = [&](const std::string& tag) -> double {
    auto it = scalars.find(tag);
    if (it == scalars.end())
      throw std::runtime_error("CIF: missing required tag " + tag);
    return cif_number(it->second, tag);
  };

  CrystalStructure s;
  s.lattice = {scalar("_cell_length_a"),    scalar("_cell_length_b"),
               scalar("_cell_length_c"),    scalar("_cell_angle_alpha"),
               scalar("_cell_angle_beta"),  scalar("_cell_angle_gamma")};

  bool found_sites = false;
  for (std::size_t li = 0; li < loops_headers.size(); ++li) {
    const auto& headers = loops_headers[li];
    auto col = [&](const std::string& tag) -> int {
      auto it = std::find(headers.begin(), headers.end(), tag);
      return it == headers.end() ? -1 : static_cast<int>(it - headers.begin());
    };
    const int csym = col("_atom_site_type_symbol");
    const int cx = col("_atom_site_fract_x");
    const int cy = col("_atom_site_fract_y");
    const int cz = col("_atom_site_fract_z");
    if (cx < 0 && cy < 0 && cz < 0 && csym < 0) continue;
    if (csym < 0 || cx < 0 || cy < 0 || cz < 0)
      throw std::runtime_error(
          "CIF: atom_site loop is missing one of _atom_site_type_symbol / "
          "_atom_site_fract_x/y/z");
    for (const auto& row : loops_rows[li]) {
      s.species.push_back(table.atomic_number(normalize_symbol(row[csym])));
      s.frac_coords.push_back(
          {wrap_frac(cif_number(row[cx], "_atom_site_fract_x")),
           wrap_frac(cif_number(row[cy], "_atom_site_fract_y")),
           wrap_frac(cif_number(row[cz], "_atom_site_fract_z"))});
    }
    found_sites = true;
  }
  if (!found_sites)
    throw std::runtime_error("CIF: missing atom_site loop");
  s.validate();
  return s;
}

}  // namespace matmodal
