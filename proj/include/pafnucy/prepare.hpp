#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pafnucy/dataset.hpp"

namespace pafnucy {

// Complex id from a ligand path: file stem, minus a "_ligand" suffix when
// present ("1abc_ligand.mol2" -> "1abc").
std::string complex_id_from_path(const std::filesystem::path& ligand_path);

// CSV affinity table (id,pKa); a header row is detected and skipped.
std::map<std::string, double> read_affinity_table(
    const std::filesystem::path& path);

struct PreparedComplexStats {
  std::string id;
  int ligand_heavy_atoms = 0;
  int pocket_heavy_atoms = 0;
  int atoms_in_box = 0;  // atoms surviving the default 20-Å crop
};

// Parses ligand/pocket mol2 pairs, fits the charge scaler over all heavy-
// atom charges unless one is supplied, and featurizes every complex.
// When an affinity table is given, every complex must appear in it.
Dataset prepare_dataset(const std::vector<std::filesystem::path>& ligands,
                        const std::vector<std::filesystem::path>& pockets,
                        const std::map<std::string, double>* affinities,
                        std::optional<double> scaler_std,
                        std::vector<PreparedComplexStats>* stats = nullptr,
                        std::vector<std::string>* warnings = nullptr);

}  // namespace pafnucy
