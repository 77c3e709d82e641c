#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "pafnucy/mol2.hpp"

namespace pafnucy {

// Fixed 19-channel atom description. Slot order is part of the dataset and
// checkpoint formats, so it never changes.
inline constexpr int kFeatureCount = 19;

enum FeatureSlot : int {
  kTypeB = 0,
  kTypeC = 1,
  kTypeN = 2,
  kTypeO = 3,
  kTypeP = 4,
  kTypeS = 5,
  kTypeSe = 6,
  kTypeHalogen = 7,
  kTypeMetal = 8,
  kHybridization = 9,
  kHeavyValence = 10,
  kHeteroValence = 11,
  kHydrophobic = 12,
  kAromatic = 13,
  kAcceptor = 14,
  kDonor = 15,
  kRing = 16,
  kPartialCharge = 17,
  kMolType = 18,
};

const std::array<std::string_view, kFeatureCount>& feature_names();

using FeatureVector = std::array<float, kFeatureCount>;

struct FeaturizedAtom {
  std::array<double, 3> position{};  // Å
  FeatureVector features{};
};

// Scales partial charges to unit standard deviation over the training set.
struct ChargeScaler {
  double std = 1.0;
};

// One-hot class for the element, or nullopt when the element is in none of
// the nine classes (all-null one-hot).
std::optional<int> atom_type_index(std::string_view element);

// 1, 2 or 3 from the sybyl suffix; out-of-range numeric suffixes clamp.
int hybridization(const Atom& atom);

// Bonded neighbors that are heavy atoms.
int heavy_valence(const Atom& atom, const Molecule& m);

// Bonded neighbors that are neither carbon nor hydrogen.
int hetero_valence(const Atom& atom, const Molecule& m);

// hydrophobic, aromatic, acceptor, donor, ring — in feature-slot order.
std::array<bool, 5> property_bits(const Atom& atom, const Molecule& m);

// Atom ids lying on some cycle of the bond graph (incident to at least one
// non-bridge edge).
std::unordered_set<int> ring_atoms(const Molecule& m);

// Population standard deviation of raw charges. Throws DomainError on
// fewer than two values or an all-equal sample.
ChargeScaler fit_charge_scaler(std::span<const double> charges);

// Featurizes the heavy atoms of both molecules: ligand atoms first
// (moltype +1), then protein atoms (moltype -1). Charges are divided by
// scaler.std.
std::vector<FeaturizedAtom> featurize_complex(const Molecule& protein,
                                              const Molecule& ligand,
                                              const ChargeScaler& scaler);

}  // namespace pafnucy
