#include "pafnucy/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "pafnucy/elements.hpp"
#include "pafnucy/errors.hpp"
#include "pafnucy/numfmt.hpp"

namespace pafnucy {
namespace {

// Adjacency over atom indices, built once per molecule.
struct BondGraph {
  std::unordered_map<int, int> id_to_index;
  std::vector<std::vector<int>> adjacency;

  explicit BondGraph(const Molecule& m) {
    id_to_index.reserve(m.atoms.size());
    for (size_t i = 0; i < m.atoms.size(); ++i) {
      id_to_index[m.atoms[i].id] = static_cast<int>(i);
    }
    adjacency.resize(m.atoms.size());
    for (const Bond& b : m.bonds) {
      const int ia = id_to_index.at(b.a);
      const int ib = id_to_index.at(b.b);
      adjacency[ia].push_back(ib);
      adjacency[ib].push_back(ia);
    }
  }
};

int atom_index_or_throw(const Atom& atom, const BondGraph& graph) {
  auto it = graph.id_to_index.find(atom.id);
  if (it == graph.id_to_index.end()) {
    throw DomainError("atom id " + std::to_string(atom.id) +
                      " does not belong to the molecule");
  }
  return it->second;
}

int count_neighbors(const Atom& atom, const Molecule& m,
                    const BondGraph& graph, bool (*pred)(const Atom&)) {
  const int idx = atom_index_or_throw(atom, graph);
  int count = 0;
  for (int n : graph.adjacency[idx]) {
    if (pred(m.atoms[n])) ++count;
  }
  return count;
}

bool is_heavy(const Atom& a) { return !a.is_hydrogen; }
bool is_hetero(const Atom& a) { return !a.is_hydrogen && a.element != "C"; }

std::string_view sybyl_suffix(const Atom& atom) {
  const std::string_view type = atom.sybyl_type;
  const size_t dot = type.find('.');
  if (dot == std::string_view::npos) return {};
  return type.substr(dot + 1);
}

int hybridization_impl(const Atom& atom) {
  const std::string_view suffix = sybyl_suffix(atom);
  if (suffix.empty()) return 3;
  long numeric = 0;
  if (parse_int(suffix, numeric)) {
    return static_cast<int>(std::clamp<long>(numeric, 1, 3));
  }
  // Standard non-numeric sybyl suffixes. Planar/aromatic types are sp2,
  // the oxidized sulfur and solvent-model types sp3.
  static const std::unordered_map<std::string_view, int> table = {
      {"ar", 2}, {"am", 2}, {"cat", 2}, {"pl3", 2}, {"co2", 2},
      {"o", 3},  {"o2", 3}, {"spc", 3}, {"t3p", 3},
  };
  auto it = table.find(suffix);
  return it != table.end() ? it->second : 3;
}

std::unordered_set<int> aromatic_bond_atoms(const Molecule& m) {
  std::unordered_set<int> ids;
  for (const Bond& b : m.bonds) {
    if (b.order_label == "ar") {
      ids.insert(b.a);
      ids.insert(b.b);
    }
  }
  return ids;
}

std::array<bool, 5> property_bits_impl(const Atom& atom, const Molecule& m,
                                       const BondGraph& graph,
                                       const std::unordered_set<int>& rings,
                                       const std::unordered_set<int>& ar_atoms) {
  const int idx = atom_index_or_throw(atom, graph);

  bool hydrophobic = atom.element == "C";
  if (hydrophobic) {
    for (int n : graph.adjacency[idx]) {
      const Atom& nb = m.atoms[n];
      if (nb.element != "C" && !nb.is_hydrogen) {
        hydrophobic = false;
        break;
      }
    }
  }

  const bool aromatic =
      sybyl_suffix(atom) == "ar" || ar_atoms.count(atom.id) > 0;

  const bool nitrogen_or_oxygen = atom.element == "N" || atom.element == "O";
  bool acceptor = false;
  if (atom.element == "O") {
    acceptor = true;
  } else if (atom.element == "N") {
    acceptor = count_neighbors(atom, m, graph, is_heavy) <= 2;
  }

  bool donor = false;
  if (nitrogen_or_oxygen) {
    for (int n : graph.adjacency[idx]) {
      if (m.atoms[n].is_hydrogen) {
        donor = true;
        break;
      }
    }
  }

  const bool ring = rings.count(atom.id) > 0;
  return {hydrophobic, aromatic, acceptor, donor, ring};
}

// Iterative bridge finding (low-link). Cycle atoms are the endpoints of
// non-bridge edges.
std::unordered_set<int> ring_atoms_impl(const Molecule& m,
                                        const BondGraph& graph) {
  const int n = static_cast<int>(m.atoms.size());
  std::vector<int> disc(n, -1);
  std::vector<int> low(n, 0);
  std::vector<int> parent_edge(n, -1);

  // Edge list aligned with a per-node adjacency of (neighbor, edge id).
  struct Edge {
    int u, v;
    bool bridge = false;
  };
  std::vector<Edge> edges;
  edges.reserve(m.bonds.size());
  std::vector<std::vector<std::pair<int, int>>> adj(n);
  for (const Bond& b : m.bonds) {
    const int ia = graph.id_to_index.at(b.a);
    const int ib = graph.id_to_index.at(b.b);
    const int eid = static_cast<int>(edges.size());
    edges.push_back({ia, ib});
    adj[ia].push_back({ib, eid});
    adj[ib].push_back({ia, eid});
  }

  int timer = 0;
  std::vector<std::pair<int, size_t>> stack;  // node, next adjacency slot
  for (int root = 0; root < n; ++root) {
    if (disc[root] != -1) continue;
    disc[root] = low[root] = timer++;
    stack.push_back({root, 0});
    while (!stack.empty()) {
      auto& [u, slot] = stack.back();
      if (slot < adj[u].size()) {
        auto [v, eid] = adj[u][slot++];
        if (eid == parent_edge[u]) continue;
        if (disc[v] == -1) {
          disc[v] = low[v] = timer++;
          parent_edge[v] = eid;
          stack.push_back({v, 0});
        } else {
          low[u] = std::min(low[u], disc[v]);
        }
      } else {
        const int done = u;
        stack.pop_back();
        if (!stack.empty()) {
          const int p = stack.back().first;
          low[p] = std::min(low[p], low[done]);
          if (low[done] > disc[p]) edges[parent_edge[done]].bridge = true;
        }
      }
    }
  }

  std::unordered_set<int> result;
  for (const Edge& e : edges) {
    if (!e.bridge) {
      result.insert(m.atoms[e.u].id);
      result.insert(m.atoms[e.v].id);
    }
  }
  return result;
}

void featurize_molecule(const Molecule& m, float moltype, double charge_std,
                        std::vector<FeaturizedAtom>& out) {
  const BondGraph graph(m);
  const auto rings = ring_atoms_impl(m, graph);
  const auto ar_atoms = aromatic_bond_atoms(m);
  for (const Atom& atom : m.atoms) {
    if (atom.is_hydrogen) continue;
    FeaturizedAtom fa;
    fa.position = atom.position;
    fa.features.fill(0.0f);
    if (auto type = atom_type_index(atom.element)) {
      fa.features[static_cast<size_t>(*type)] = 1.0f;
    }
    fa.features[kHybridization] =
        static_cast<float>(hybridization_impl(atom));
    fa.features[kHeavyValence] =
        static_cast<float>(count_neighbors(atom, m, graph, is_heavy));
    fa.features[kHeteroValence] =
        static_cast<float>(count_neighbors(atom, m, graph, is_hetero));
    const auto bits = property_bits_impl(atom, m, graph, rings, ar_atoms);
    for (int i = 0; i < 5; ++i) {
      fa.features[static_cast<size_t>(kHydrophobic + i)] = bits[static_cast<size_t>(i)] ? 1.0f : 0.0f;
    }
    fa.features[kPartialCharge] =
        static_cast<float>(atom.partial_charge / charge_std);
    fa.features[kMolType] = moltype;
    out.push_back(fa);
  }
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static const std::array<std::string_view, kFeatureCount> names = {
      "B",           "C",           "N",
      "O",           "P",           "S",
      "Se",          "halogen",     "metal",
      "hyb",         "heavy_valence", "hetero_valence",
      "hydrophobic", "aromatic",    "acceptor",
      "donor",       "ring",        "partialcharge",
      "moltype",
  };
  return names;
}

std::optional<int> atom_type_index(std::string_view element) {
  if (element == "B") return 0;
  if (element == "C") return 1;
  if (element == "N") return 2;
  if (element == "O") return 3;
  if (element == "P") return 4;
  if (element == "S") return 5;
  if (element == "Se") return 6;
  if (is_halogen(element)) return 7;
  if (is_metal(element)) return 8;
  return std::nullopt;
}

int hybridization(const Atom& atom) { return hybridization_impl(atom); }

int heavy_valence(const Atom& atom, const Molecule& m) {
  return count_neighbors(atom, m, BondGraph(m), is_heavy);
}

int hetero_valence(const Atom& atom, const Molecule& m) {
  return count_neighbors(atom, m, BondGraph(m), is_hetero);
}

std::array<bool, 5> property_bits(const Atom& atom, const Molecule& m) {
  const BondGraph graph(m);
  return property_bits_impl(atom, m, graph, ring_atoms_impl(m, graph),
                            aromatic_bond_atoms(m));
}

std::unordered_set<int> ring_atoms(const Molecule& m) {
  return ring_atoms_impl(m, BondGraph(m));
}

ChargeScaler fit_charge_scaler(std::span<const double> charges) {
  if (charges.size() < 2) {
    throw DomainError("charge scaler needs at least 2 values, got " +
                      std::to_string(charges.size()));
  }
  double mean = 0.0;
  for (double c : charges) mean += c;
  mean /= static_cast<double>(charges.size());
  double var = 0.0;
  for (double c : charges) var += (c - mean) * (c - mean);
  var /= static_cast<double>(charges.size());
  const double std = std::sqrt(var);
  if (!(std > 0.0)) {
    throw DomainError("all partial charges are equal; cannot fit scaler");
  }
  return ChargeScaler{std};
}

std::vector<FeaturizedAtom> featurize_complex(const Molecule& protein,
                                              const Molecule& ligand,
                                              const ChargeScaler& scaler) {
  if (!(scaler.std > 0.0)) {
    throw DomainError("charge scaler std must be positive");
  }
  std::vector<FeaturizedAtom> out;
  out.reserve(protein.atoms.size() + ligand.atoms.size());
  featurize_molecule(ligand, 1.0f, scaler.std, out);
  featurize_molecule(protein, -1.0f, scaler.std, out);
  return out;
}

}  // namespace pafnucy
