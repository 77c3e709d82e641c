#include "pafnucy/elements.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

namespace pafnucy {
namespace {

const std::unordered_set<std::string_view>& element_table() {
  static const std::unordered_set<std::string_view> table = {
      "H",  "D",  "T",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne",
      "Na", "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti",
      "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se",
      "Br", "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd",
      "Ag", "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce",
      "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
      "Lu", "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb",
      "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu",
      "Am", "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg",
      "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og",
  };
  return table;
}

const std::unordered_set<std::string_view>& metal_table() {
  // Alkali/alkaline-earth and p-block metals named explicitly, plus the
  // full d- and f-blocks.
  static const std::unordered_set<std::string_view> table = {
      "Li", "Na", "K",  "Rb", "Cs", "Be", "Mg", "Ca", "Sr", "Ba",
      "Al", "Ga", "In", "Sn", "Tl", "Pb",
      // d-block
      "Sc", "Ti", "V",  "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Y",  "Zr",
      "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "Hf", "Ta", "W",  "Re",
      "Os", "Ir", "Pt", "Au", "Hg", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds",
      "Rg", "Cn",
      // f-block
      "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er",
      "Tm", "Yb", "Lu", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm", "Bk",
      "Cf", "Es", "Fm", "Md", "No", "Lr",
  };
  return table;
}

}  // namespace

std::string normalize_element(std::string_view symbol) {
  std::string out(symbol);
  if (!out.empty()) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    for (size_t i = 1; i < out.size(); ++i) {
      out[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[i])));
    }
  }
  return out;
}

bool is_known_element(std::string_view symbol) {
  return element_table().count(symbol) > 0;
}

bool is_halogen(std::string_view symbol) {
  return symbol == "F" || symbol == "Cl" || symbol == "Br" || symbol == "I" ||
         symbol == "At";
}

bool is_metal(std::string_view symbol) {
  return metal_table().count(symbol) > 0;
}

}  // namespace pafnucy
