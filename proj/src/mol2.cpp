#include "pafnucy/mol2.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "pafnucy/elements.hpp"
#include "pafnucy/errors.hpp"
#include "pafnucy/numfmt.hpp"

namespace pafnucy {
namespace {

constexpr std::string_view kSectionPrefix = "@<TRIPOS>";

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> tokens;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r')) {
      ++i;
    }
    size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
           line[i] != '\r') {
      ++i;
    }
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

bool is_blank(std::string_view line) {
  for (char c : line) {
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

// Element symbol = part of the sybyl type before the first '.'. Dummy
// atoms and lone pairs are not physical atoms and are rejected.
std::string element_from_sybyl(std::string_view sybyl, long line_no) {
  const size_t dot = sybyl.find('.');
  std::string symbol = normalize_element(sybyl.substr(0, dot));
  if (symbol == "Du") {
    throw ParseError("dummy atom type '" + std::string(sybyl) + "'", line_no);
  }
  if (symbol == "Lp") {
    throw ParseError("lone-pair atom type '" + std::string(sybyl) + "'",
                     line_no);
  }
  if (!is_known_element(symbol)) {
    throw ParseError("unrecognized element in atom type '" +
                         std::string(sybyl) + "'",
                     line_no);
  }
  return symbol;
}

double parse_coord(std::string_view token, const char* what, long line_no) {
  double value = 0.0;
  if (!parse_double(token, value)) {
    throw ParseError(std::string("non-numeric ") + what + " field '" +
                         std::string(token) + "'",
                     line_no);
  }
  if (!std::isfinite(value)) {
    throw ParseError(std::string("non-finite ") + what + " field", line_no);
  }
  return value;
}

const std::set<std::string, std::less<>>& bond_labels() {
  static const std::set<std::string, std::less<>> labels = {
      "1", "2", "3", "am", "ar", "du", "un", "nc"};
  return labels;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

enum class Section { None, Molecule, Atom, Bond, Other };

}  // namespace

int Molecule::atom_index(int id) const {
  for (size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

Molecule parse_mol2(std::string_view text,
                    std::vector<std::string>* warnings) {
  Molecule mol;
  Section section = Section::None;
  bool seen_molecule = false;
  bool seen_atom_section = false;
  int molecule_data_line = 0;  // data lines consumed inside MOLECULE

  std::unordered_map<int, int> id_to_index;
  std::set<std::pair<int, int>> bond_pairs;

  long line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    if (!line.empty() && line[0] == '#') continue;

    if (line.substr(0, kSectionPrefix.size()) == kSectionPrefix) {
      std::string_view name = line.substr(kSectionPrefix.size());
      while (!name.empty() && (name.back() == '\r' || name.back() == ' ')) {
        name.remove_suffix(1);
      }
      if (name == "MOLECULE") {
        if (seen_molecule) {
          if (warnings) {
            warnings->push_back(
                "line " + std::to_string(line_no) +
                ": trailing @<TRIPOS>MOLECULE block ignored");
          }
          break;  // only the first molecule block is read
        }
        seen_molecule = true;
        section = Section::Molecule;
        molecule_data_line = 0;
      } else if (name == "ATOM") {
        seen_atom_section = true;
        section = Section::Atom;
      } else if (name == "BOND") {
        section = Section::Bond;
      } else {
        section = Section::Other;
      }
      continue;
    }

    if (is_blank(line)) continue;

    switch (section) {
      case Section::Molecule: {
        if (molecule_data_line == 0) {
          auto trimmed = line;
          while (!trimmed.empty() &&
                 (trimmed.back() == '\r' || trimmed.back() == ' ')) {
            trimmed.remove_suffix(1);
          }
          mol.name = std::string(trimmed);
        }
        // remaining MOLECULE lines (counts, type, charge model) are unused
        ++molecule_data_line;
        break;
      }
      case Section::Atom: {
        auto tokens = tokenize(line);
        if (tokens.size() < 6) {
          throw ParseError("ATOM record needs at least 6 fields", line_no);
        }
        Atom atom;
        long id = 0;
        if (!parse_int(tokens[0], id) || id <= 0) {
          throw ParseError("bad atom id '" + std::string(tokens[0]) + "'",
                           line_no);
        }
        atom.id = static_cast<int>(id);
        atom.position[0] = parse_coord(tokens[2], "x coordinate", line_no);
        atom.position[1] = parse_coord(tokens[3], "y coordinate", line_no);
        atom.position[2] = parse_coord(tokens[4], "z coordinate", line_no);
        atom.sybyl_type = std::string(tokens[5]);
        atom.element = element_from_sybyl(atom.sybyl_type, line_no);
        atom.is_hydrogen = atom.element == "H" || atom.element == "D";
        if (tokens.size() >= 9) {
          atom.partial_charge = parse_coord(tokens[8], "charge", line_no);
        }
        if (id_to_index.count(atom.id)) {
          throw ParseError("duplicate atom id " + std::to_string(atom.id),
                           line_no);
        }
        id_to_index[atom.id] = static_cast<int>(mol.atoms.size());
        mol.atoms.push_back(std::move(atom));
        break;
      }
      case Section::Bond: {
        auto tokens = tokenize(line);
        if (tokens.size() < 4) {
          throw ParseError("BOND record needs at least 4 fields", line_no);
        }
        long a = 0;
        long b = 0;
        if (!parse_int(tokens[1], a) || !parse_int(tokens[2], b)) {
          throw ParseError("non-numeric bond endpoint", line_no);
        }
        if (a == b) {
          throw ParseError("bond connects atom " + std::to_string(a) +
                               " to itself",
                           line_no);
        }
        if (!id_to_index.count(static_cast<int>(a)) ||
            !id_to_index.count(static_cast<int>(b))) {
          throw ParseError("bond references unknown atom id", line_no);
        }
        std::string label = lowercase(tokens[3]);
        if (!bond_labels().count(label)) {
          throw ParseError("unknown bond type '" + std::string(tokens[3]) +
                               "'",
                           line_no);
        }
        const int lo = static_cast<int>(std::min(a, b));
        const int hi = static_cast<int>(std::max(a, b));
        if (!bond_pairs.insert({lo, hi}).second) {
          throw ParseError("duplicate bond between atoms " +
                               std::to_string(a) + " and " + std::to_string(b),
                           line_no);
        }
        mol.bonds.push_back(
            {static_cast<int>(a), static_cast<int>(b), std::move(label)});
        break;
      }
      case Section::None:
      case Section::Other:
        break;
    }
  }

  if (!seen_atom_section) {
    throw ParseError("missing @<TRIPOS>ATOM section");
  }
  return mol;
}

std::string write_mol2(const Molecule& m) {
  std::ostringstream out;
  out << "@<TRIPOS>MOLECULE\n";
  out << m.name << "\n";
  out << m.atoms.size() << " " << m.bonds.size() << " 0 0 0\n";
  out << "SMALL\nUSER_CHARGES\n\n";
  out << "@<TRIPOS>ATOM\n";
  for (const Atom& a : m.atoms) {
    out << a.id << " " << a.element << a.id << " "
        << format_double(a.position[0]) << " " << format_double(a.position[1])
        << " " << format_double(a.position[2]) << " " << a.sybyl_type
        << " 1 MOL " << format_double(a.partial_charge) << "\n";
  }
  out << "@<TRIPOS>BOND\n";
  for (size_t i = 0; i < m.bonds.size(); ++i) {
    const Bond& b = m.bonds[i];
    out << (i + 1) << " " << b.a << " " << b.b << " " << b.order_label
        << "\n";
  }
  return out.str();
}

std::vector<Atom> heavy_atoms(const Molecule& m) {
  std::vector<Atom> out;
  out.reserve(m.atoms.size());
  for (const Atom& a : m.atoms) {
    if (!a.is_hydrogen) out.push_back(a);
  }
  return out;
}

}  // namespace pafnucy
