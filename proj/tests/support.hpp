#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles are
// written as plainly as possible and never call the production kernels they
// check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "pafnucy/dataset.hpp"
#include "pafnucy/featurizer.hpp"
#include "pafnucy/mol2.hpp"
#include "pafnucy/network.hpp"
#include "pafnucy/rng.hpp"

namespace testsupport {

inline const char* kMethaneMol2 = R"(@<TRIPOS>MOLECULE
methane
5 4 0 0 0
SMALL
USER_CHARGES

@<TRIPOS>ATOM
1 C1 0.0000 0.0000 0.0000 C.3 1 MET -0.4
2 H1 0.6290 0.6290 0.6290 H 1 MET 0.1
3 H2 -0.6290 -0.6290 0.6290 H 1 MET 0.1
4 H3 -0.6290 0.6290 -0.6290 H 1 MET 0.1
5 H4 0.6290 -0.6290 -0.6290 H 1 MET 0.1
@<TRIPOS>BOND
1 1 2 1
2 1 3 1
3 1 4 1
4 1 5 1
)";

inline const char* kBenzeneMol2 = R"(@<TRIPOS>MOLECULE
benzene
12 12 0 0 0
SMALL
USER_CHARGES

@<TRIPOS>ATOM
1 C1 -0.7076 1.2252 0.0000 C.ar 1 BNZ -0.062
2 C2 0.7076 1.2252 0.0000 C.ar 1 BNZ -0.062
3 C3 1.4151 0.0000 0.0000 C.ar 1 BNZ -0.062
4 C4 0.7076 -1.2252 0.0000 C.ar 1 BNZ -0.062
5 C5 -0.7076 -1.2252 0.0000 C.ar 1 BNZ -0.062
6 C6 -1.4151 0.0000 0.0000 C.ar 1 BNZ -0.062
7 H1 -1.2575 2.1775 0.0000 H 1 BNZ 0.062
8 H2 1.2575 2.1775 0.0000 H 1 BNZ 0.062
9 H3 2.5151 0.0000 0.0000 H 1 BNZ 0.062
10 H4 1.2575 -2.1775 0.0000 H 1 BNZ 0.062
11 H5 -1.2575 -2.1775 0.0000 H 1 BNZ 0.062
12 H6 -2.5151 0.0000 0.0000 H 1 BNZ 0.062
@<TRIPOS>BOND
1 1 2 ar
2 2 3 ar
3 3 4 ar
4 4 5 ar
5 5 6 ar
6 6 1 ar
7 1 7 1
8 2 8 1
9 3 9 1
10 4 10 1
11 5 11 1
12 6 12 1
)";

inline const char* kEthanolMol2 = R"(@<TRIPOS>MOLECULE
ethanol
9 8 0 0 0
SMALL
USER_CHARGES

@<TRIPOS>ATOM
1 C1 -0.8878 0.1251 0.0000 C.3 1 ETH -0.09
2 C2 0.4781 -0.5325 0.0000 C.3 1 ETH 0.11
3 O1 1.4855 0.4725 0.0000 O.3 1 ETH -0.60
4 H1 -1.0231 0.7458 0.8901 H 1 ETH 0.04
5 H2 -1.0231 0.7458 -0.8901 H 1 ETH 0.04
6 H3 -1.6721 -0.6338 0.0000 H 1 ETH 0.04
7 H4 0.6003 -1.1551 0.8920 H 1 ETH 0.05
8 H5 0.6003 -1.1551 -0.8920 H 1 ETH 0.05
9 H6 2.3431 0.0288 0.0000 H 1 ETH 0.36
@<TRIPOS>BOND
1 1 2 1
2 2 3 1
3 1 4 1
4 1 5 1
5 1 6 1
6 2 7 1
7 2 8 1
8 3 9 1
)";

inline const char* kTolueneMol2 = R"(@<TRIPOS>MOLECULE
toluene
15 15 0 0 0
SMALL
USER_CHARGES

@<TRIPOS>ATOM
1 C1 -0.7076 1.2252 0.0000 C.ar 1 TOL -0.06
2 C2 0.7076 1.2252 0.0000 C.ar 1 TOL -0.06
3 C3 1.4151 0.0000 0.0000 C.ar 1 TOL -0.06
4 C4 0.7076 -1.2252 0.0000 C.ar 1 TOL -0.06
5 C5 -0.7076 -1.2252 0.0000 C.ar 1 TOL -0.06
6 C6 -1.4151 0.0000 0.0000 C.ar 1 TOL -0.06
7 C7 -2.9251 0.0000 0.0000 C.3 1 TOL -0.17
8 H1 -1.2575 2.1775 0.0000 H 1 TOL 0.06
9 H2 1.2575 2.1775 0.0000 H 1 TOL 0.06
10 H3 2.5151 0.0000 0.0000 H 1 TOL 0.06
11 H4 1.2575 -2.1775 0.0000 H 1 TOL 0.06
12 H5 -1.2575 -2.1775 0.0000 H 1 TOL 0.06
13 H6 -3.3096 0.5134 0.8892 H 1 TOL 0.06
14 H7 -3.3096 0.5134 -0.8892 H 1 TOL 0.06
15 H8 -3.3096 -1.0268 0.0000 H 1 TOL 0.06
@<TRIPOS>BOND
1 1 2 ar
2 2 3 ar
3 3 4 ar
4 4 5 ar
5 5 6 ar
6 6 1 ar
7 6 7 1
8 1 8 1
9 2 9 1
10 3 10 1
11 4 11 1
12 5 12 1
13 7 13 1
14 7 14 1
15 7 15 1
)";

// --- random structure generators -----------------------------------------

// A random connected-or-not simple graph of n carbon atoms.
inline pafnucy::Molecule random_carbon_graph(int n, double edge_prob,
                                             pafnucy::RngStream& rng) {
  pafnucy::Molecule m;
  m.name = "random";
  for (int i = 1; i <= n; ++i) {
    pafnucy::Atom a;
    a.id = i;
    a.element = "C";
    a.sybyl_type = "C.3";
    a.position = {static_cast<double>(i), 0.0, 0.0};
    m.atoms.push_back(a);
  }
  for (int i = 1; i <= n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      if (rng.uniform() < edge_prob) m.bonds.push_back({i, j, "1"});
    }
  }
  return m;
}

// Oracle: an edge lies on a cycle iff its endpoints remain connected after
// removing it.
inline std::set<int> ring_atoms_oracle(const pafnucy::Molecule& m) {
  const int n = static_cast<int>(m.atoms.size());
  std::vector<int> ids(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = m.atoms[static_cast<size_t>(i)].id;
  auto index_of = [&](int id) {
    return static_cast<int>(std::find(ids.begin(), ids.end(), id) -
                            ids.begin());
  };

  std::set<int> result;
  for (size_t skip = 0; skip < m.bonds.size(); ++skip) {
    // BFS from one endpoint with bond `skip` removed
    std::vector<std::vector<int>> adj(static_cast<size_t>(n));
    for (size_t e = 0; e < m.bonds.size(); ++e) {
      if (e == skip) continue;
      const int a = index_of(m.bonds[e].a);
      const int b = index_of(m.bonds[e].b);
      adj[static_cast<size_t>(a)].push_back(b);
      adj[static_cast<size_t>(b)].push_back(a);
    }
    const int src = index_of(m.bonds[skip].a);
    const int dst = index_of(m.bonds[skip].b);
    std::vector<bool> seen(static_cast<size_t>(n), false);
    std::queue<int> queue;
    queue.push(src);
    seen[static_cast<size_t>(src)] = true;
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop();
      for (int v : adj[static_cast<size_t>(u)]) {
        if (!seen[static_cast<size_t>(v)]) {
          seen[static_cast<size_t>(v)] = true;
          queue.push(v);
        }
      }
    }
    if (seen[static_cast<size_t>(dst)]) {
      result.insert(m.bonds[skip].a);
      result.insert(m.bonds[skip].b);
    }
  }
  return result;
}

// Random featurized atoms around a center; roughly half ligand-tagged.
inline std::vector<pafnucy::FeaturizedAtom> random_atoms(
    int n, double spread, pafnucy::RngStream& rng,
    const std::array<double, 3>& center = {0, 0, 0}) {
  std::vector<pafnucy::FeaturizedAtom> atoms;
  atoms.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    pafnucy::FeaturizedAtom a;
    for (int k = 0; k < 3; ++k) {
      a.position[k] = center[k] + (rng.uniform() * 2.0 - 1.0) * spread;
    }
    for (float& f : a.features) {
      f = static_cast<float>(rng.uniform() * 2.0 - 1.0);
    }
    a.features[pafnucy::kMolType] = i % 2 == 0 ? 1.0f : -1.0f;
    atoms.push_back(a);
  }
  if (n > 0) atoms[0].features[pafnucy::kMolType] = 1.0f;
  return atoms;
}

inline pafnucy::DatasetRecord random_record(const std::string& id, int n_atoms,
                                            double spread, double affinity,
                                            pafnucy::RngStream& rng) {
  pafnucy::DatasetRecord r;
  r.id = id;
  r.atoms = random_atoms(n_atoms, spread, rng);
  r.affinity = affinity;
  return r;
}

// --- independent numeric oracles ------------------------------------------

// Naive cross-correlation with SAME zero padding, written elementwise.
template <class T>
pafnucy::Tensor<T> conv3d_reference(const pafnucy::Tensor<T>& input,
                                    const pafnucy::Tensor<T>& weights,
                                    const pafnucy::Tensor<T>& bias) {
  const int D = input.shape[0], H = input.shape[1], W = input.shape[2];
  const int cin = input.shape[3];
  const int K = weights.shape[0];
  const int cout = weights.shape[4];
  const int P = (K - 1) / 2;
  auto in_at = [&](int z, int y, int x, int c) -> T {
    if (z < 0 || z >= D || y < 0 || y >= H || x < 0 || x >= W) return T(0);
    return input.values[static_cast<size_t>(((z * H + y) * W + x) * cin + c)];
  };
  auto w_at = [&](int kz, int ky, int kx, int ci, int co) -> T {
    return weights.values[static_cast<size_t>(
        ((((kz * K + ky) * K + kx) * cin) + ci) * cout + co)];
  };
  pafnucy::Tensor<T> out({D, H, W, cout});
  for (int z = 0; z < D; ++z) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        for (int co = 0; co < cout; ++co) {
          T acc = bias.values[static_cast<size_t>(co)];
          for (int kz = 0; kz < K; ++kz) {
            for (int ky = 0; ky < K; ++ky) {
              for (int kx = 0; kx < K; ++kx) {
                for (int ci = 0; ci < cin; ++ci) {
                  acc += in_at(z + kz - P, y + ky - P, x + kx - P, ci) *
                         w_at(kz, ky, kx, ci, co);
                }
              }
            }
          }
          out.values[static_cast<size_t>(((z * H + y) * W + x) * cout + co)] =
              acc;
        }
      }
    }
  }
  return out;
}

// Closed-form least squares of t against y, computed from scratch.
struct RegressionOracle {
  double slope, intercept, r, sd, rmse, mae;
};

inline RegressionOracle regression_oracle(const std::vector<double>& t,
                                          const std::vector<double>& y) {
  const double n = static_cast<double>(t.size());
  double t_sum = 0, y_sum = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    t_sum += t[i];
    y_sum += y[i];
  }
  const double t_bar = t_sum / n;
  const double y_bar = y_sum / n;
  double syy = 0, stt = 0, sty = 0, sq = 0, ab = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    syy += (y[i] - y_bar) * (y[i] - y_bar);
    stt += (t[i] - t_bar) * (t[i] - t_bar);
    sty += (t[i] - t_bar) * (y[i] - y_bar);
    sq += (y[i] - t[i]) * (y[i] - t[i]);
    ab += std::abs(y[i] - t[i]);
  }
  RegressionOracle o{};
  o.slope = sty / syy;
  o.intercept = t_bar - o.slope * y_bar;
  o.r = sty / std::sqrt(stt * syy);
  double resid = 0;
  for (size_t i = 0; i < t.size(); ++i) {
    const double e = t[i] - (o.slope * y[i] + o.intercept);
    resid += e * e;
  }
  o.sd = std::sqrt(resid / (n - 1));
  o.rmse = std::sqrt(sq / n);
  o.mae = ab / n;
  return o;
}

// --- finite-difference gradient check --------------------------------------

// Flattened view over every network parameter, in checkpoint order.
template <class T>
std::vector<pafnucy::Tensor<T>*> parameter_tensors(pafnucy::NetworkT<T>& net) {
  std::vector<pafnucy::Tensor<T>*> out;
  for (size_t i = 0; i < net.conv_w.size(); ++i) {
    out.push_back(&net.conv_w[i]);
    out.push_back(&net.conv_b[i]);
  }
  for (size_t i = 0; i < net.dense_w.size(); ++i) {
    out.push_back(&net.dense_w[i]);
    out.push_back(&net.dense_b[i]);
  }
  return out;
}

template <class T>
std::vector<pafnucy::Tensor<T>*> gradient_tensors(pafnucy::Gradients<T>& g) {
  std::vector<pafnucy::Tensor<T>*> out;
  for (size_t i = 0; i < g.conv_w.size(); ++i) {
    out.push_back(&g.conv_w[i]);
    out.push_back(&g.conv_b[i]);
  }
  for (size_t i = 0; i < g.dense_w.size(); ++i) {
    out.push_back(&g.dense_w[i]);
    out.push_back(&g.dense_b[i]);
  }
  return out;
}

// Spreads every parameter uniformly over [-0.5, 0.5]. The production
// initialization is a poor operating point for finite differences: conv
// weights of order 1e-3 give vanishing gradients and near-tied pooling
// windows whose argmax flips under the probe step.
template <class T>
void randomize_parameters(pafnucy::NetworkT<T>& net, uint64_t seed) {
  pafnucy::RngStream rng(seed);
  net.for_each_parameter([&](pafnucy::Tensor<T>& t, bool) {
    for (T& v : t.values) v = static_cast<T>(rng.uniform() - 0.5);
  });
}

// Central differences against the analytic gradient. The RNG is reseeded
// identically for every loss evaluation so dropout masks match across the
// +eps and -eps runs. Loss values come from the forward pass plus an
// explicit MSE/L2 sum, independent of the backward code under test.
// Returns the maximum relative error.
template <class T>
double gradient_check(pafnucy::NetworkT<T>& net,
                      const std::vector<pafnucy::LabeledGrid<T>>& batch,
                      uint64_t seed, double eps) {
  pafnucy::Gradients<T> grads;
  {
    pafnucy::RngStream rng(seed);
    pafnucy::loss_and_gradients(net, batch, &rng, grads);
  }
  auto loss_at = [&]() {
    pafnucy::RngStream rng(seed);
    double data = 0.0;
    for (const auto& item : batch) {
      const double pred = static_cast<double>(
          pafnucy::forward(net, *item.grid, true, &rng));
      data += (pred - item.label) * (pred - item.label);
    }
    data /= static_cast<double>(batch.size());
    double penalty = 0.0;
    net.for_each_parameter([&](const pafnucy::Tensor<T>& t, bool is_weight) {
      if (!is_weight) return;
      for (const T& v : t.values) {
        penalty += static_cast<double>(v) * static_cast<double>(v);
      }
    });
    return data + net.config.lambda_l2 * penalty;
  };

  auto params = parameter_tensors(net);
  auto grad_views = gradient_tensors(grads);
  double max_rel = 0.0;
  for (size_t p = 0; p < params.size(); ++p) {
    for (size_t i = 0; i < params[p]->numel(); ++i) {
      T& value = (*params[p])[i];
      const T original = value;
      value = original + static_cast<T>(eps);
      const double plus = loss_at();
      value = original - static_cast<T>(eps);
      const double minus = loss_at();
      value = original;
      const double fd = (plus - minus) / (2.0 * eps);
      const double analytic = static_cast<double>((*grad_views[p])[i]);
      const double rel = std::abs(analytic - fd) /
                         std::max(std::abs(analytic) + std::abs(fd), 1e-6);
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace testsupport
