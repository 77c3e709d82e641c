#pragma once

#include <string>
#include <string_view>

namespace pafnucy {

// Normalizes an element symbol to standard capitalization ("CL" -> "Cl").
std::string normalize_element(std::string_view symbol);

// True for any periodic-table symbol (plus the hydrogen isotopes D and T).
bool is_known_element(std::string_view symbol);

bool is_halogen(std::string_view symbol);

// Metal class used by the atom-type encoding: the common biological and
// main-group metals plus every d/f-block element.
bool is_metal(std::string_view symbol);

}  // namespace pafnucy
