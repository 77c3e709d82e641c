#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace pafnucy {

struct Atom {
  int id = 0;                       // file-local id from the ATOM record
  std::string element;              // normalized symbol, e.g. "C", "Zn"
  std::string sybyl_type;           // raw mol2 atom type, e.g. "C.ar"
  std::array<double, 3> position{}; // Å
  double partial_charge = 0.0;
  bool is_hydrogen = false;
};

struct Bond {
  int a = 0;
  int b = 0;
  std::string order_label;  // one of 1, 2, 3, am, ar, du, un, nc
};

struct Molecule {
  std::string name;
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  // Index into atoms for a file-local id, or -1.
  int atom_index(int id) const;
};

// Parses the first @<TRIPOS>MOLECULE block of a Tripos mol2 file. Unknown
// sections are skipped. Trailing molecule blocks produce a warning, not an
// error. Throws ParseError on malformed input.
Molecule parse_mol2(std::string_view text,
                    std::vector<std::string>* warnings = nullptr);

// Serializes a Molecule back to mol2 text. Numeric fields use shortest
// round-trip formatting, so parse(write(m)) reproduces m exactly.
std::string write_mol2(const Molecule& m);

// Atoms with is_hydrogen == false, in file order.
std::vector<Atom> heavy_atoms(const Molecule& m);

}  // namespace pafnucy
