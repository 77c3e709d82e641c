#include "pafnucy/prepare.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pafnucy/errors.hpp"
#include "pafnucy/numfmt.hpp"
#include "pafnucy/voxelizer.hpp"

namespace pafnucy {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Molecule parse_mol2_file(const std::filesystem::path& path,
                         std::vector<std::string>* warnings) {
  try {
    return parse_mol2(read_file(path), warnings);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.line());
  }
}

int count_in_box(const std::vector<FeaturizedAtom>& atoms,
                 const std::array<double, 3>& center) {
  const GridParams params{};
  const int d = params.points_per_axis();
  const int half = d / 2;
  int count = 0;
  for (const FeaturizedAtom& a : atoms) {
    bool inside = true;
    for (int k = 0; k < 3; ++k) {
      const int idx = static_cast<int>(std::round(
                          (a.position[k] - center[k]) / params.resolution)) +
                      half;
      if (idx < 0 || idx >= d) {
        inside = false;
        break;
      }
    }
    if (inside) ++count;
  }
  return count;
}

}  // namespace

std::string complex_id_from_path(const std::filesystem::path& ligand_path) {
  std::string stem = ligand_path.stem().string();
  constexpr std::string_view suffix = "_ligand";
  if (stem.size() > suffix.size() &&
      stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
    stem.resize(stem.size() - suffix.size());
  }
  return stem;
}

std::map<std::string, double> read_affinity_table(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open affinity table " + path.string());
  std::map<std::string, double> table;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(path.string() + ": expected 'id,pKa'", line_no);
    }
    const std::string id = line.substr(0, comma);
    double value = 0.0;
    if (!parse_double(std::string_view(line).substr(comma + 1), value)) {
      if (line_no == 1) continue;  // header row
      throw ParseError(path.string() + ": non-numeric affinity for '" + id +
                           "'",
                       line_no);
    }
    table[id] = value;
  }
  return table;
}

Dataset prepare_dataset(const std::vector<std::filesystem::path>& ligands,
                        const std::vector<std::filesystem::path>& pockets,
                        const std::map<std::string, double>* affinities,
                        std::optional<double> scaler_std,
                        std::vector<PreparedComplexStats>* stats,
                        std::vector<std::string>* warnings) {
  if (ligands.size() != pockets.size()) {
    throw DomainError("ligand and pocket lists must have the same length");
  }
  if (ligands.empty()) throw DomainError("no complexes to prepare");

  struct ParsedComplex {
    std::string id;
    Molecule ligand;
    Molecule pocket;
  };
  std::vector<ParsedComplex> parsed;
  parsed.reserve(ligands.size());
  for (size_t i = 0; i < ligands.size(); ++i) {
    ParsedComplex c;
    c.id = complex_id_from_path(ligands[i]);
    c.ligand = parse_mol2_file(ligands[i], warnings);
    c.pocket = parse_mol2_file(pockets[i], warnings);
    parsed.push_back(std::move(c));
  }

  ChargeScaler scaler;
  if (scaler_std) {
    if (!(*scaler_std > 0.0)) {
      throw DomainError("supplied charge scaler std must be positive");
    }
    scaler.std = *scaler_std;
  } else {
    std::vector<double> charges;
    for (const ParsedComplex& c : parsed) {
      for (const Molecule* m : {&c.ligand, &c.pocket}) {
        for (const Atom& a : m->atoms) {
          if (!a.is_hydrogen) charges.push_back(a.partial_charge);
        }
      }
    }
    scaler = fit_charge_scaler(charges);
  }

  Dataset ds;
  ds.charge_scaler_std = scaler.std;
  ds.records.reserve(parsed.size());
  for (const ParsedComplex& c : parsed) {
    DatasetRecord record;
    record.id = c.id;
    record.atoms = featurize_complex(c.pocket, c.ligand, scaler);
    if (affinities) {
      auto it = affinities->find(c.id);
      if (it == affinities->end()) {
        throw DomainError("no affinity for complex '" + c.id +
                          "' in the affinity table");
      }
      record.affinity = it->second;
    }

    if (stats) {
      PreparedComplexStats s;
      s.id = c.id;
      for (const FeaturizedAtom& a : record.atoms) {
        if (a.features[kMolType] > 0.0f) {
          ++s.ligand_heavy_atoms;
        } else {
          ++s.pocket_heavy_atoms;
        }
      }
      s.atoms_in_box = count_in_box(record.atoms, ligand_centroid(record.atoms));
      stats->push_back(std::move(s));
    }
    ds.records.push_back(std::move(record));
  }
  return ds;
}

}  // namespace pafnucy
