#include "pafnucy/voxelizer.hpp"

#include <cmath>
#include <string>

#include "pafnucy/errors.hpp"

namespace pafnucy {
namespace {

constexpr double kOcclusionBoxSize = 5.0;   // Å
constexpr double kOcclusionStep = 3.0;      // Å
constexpr int kOcclusionPositions = 7;      // per axis

int round_half_away(double x) {
  return static_cast<int>(std::round(x));
}

}  // namespace

int GridParams::points_per_axis() const {
  return static_cast<int>(std::round(box_size / resolution)) + 1;
}

void GridParams::validate() const {
  if (!(box_size > 0.0) || !(resolution > 0.0)) {
    throw DomainError("grid box size and resolution must be positive");
  }
  if (points_per_axis() % 2 == 0) {
    throw DomainError(
        "grid needs an odd point count per axis for a center cell; got " +
        std::to_string(points_per_axis()));
  }
}

float& Grid::at(int x, int y, int z, int c) {
  const int d = shape[1];
  const int ch = shape[3];
  return data[static_cast<size_t>(((x * d + y) * d + z)) * ch + c];
}

float Grid::at(int x, int y, int z, int c) const {
  const int d = shape[1];
  const int ch = shape[3];
  return data[static_cast<size_t>(((x * d + y) * d + z)) * ch + c];
}

std::array<double, 3> CubeRotation::apply(
    const std::array<double, 3>& v) const {
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) {
    out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
  }
  return out;
}

CubeRotation CubeRotation::transposed() const {
  CubeRotation t;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) t.m[i][j] = m[j][i];
  }
  return t;
}

CubeRotation CubeRotation::compose(const CubeRotation& other) const {
  CubeRotation out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      int s = 0;
      for (int k = 0; k < 3; ++k) s += m[i][k] * other.m[k][j];
      out.m[i][j] = s;
    }
  }
  return out;
}

CubeRotation identity_rotation() {
  return CubeRotation{{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}};
}

const std::vector<CubeRotation>& cube_rotations() {
  // Closure of the three 90-degree axis rotations, breadth-first from the
  // identity. Insertion order is the canonical order.
  static const std::vector<CubeRotation> rotations = [] {
    const CubeRotation rx{{{{1, 0, 0}, {0, 0, -1}, {0, 1, 0}}}};
    const CubeRotation ry{{{{0, 0, 1}, {0, 1, 0}, {-1, 0, 0}}}};
    const CubeRotation rz{{{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}}};
    std::vector<CubeRotation> found = {identity_rotation()};
    for (size_t i = 0; i < found.size(); ++i) {
      for (const CubeRotation& gen : {rx, ry, rz}) {
        const CubeRotation next = gen.compose(found[i]);
        bool known = false;
        for (const CubeRotation& r : found) {
          if (r == next) {
            known = true;
            break;
          }
        }
        if (!known) found.push_back(next);
      }
    }
    return found;
  }();
  return rotations;
}

int cube_rotation_index(const CubeRotation& r) {
  const auto& all = cube_rotations();
  for (size_t i = 0; i < all.size(); ++i) {
    if (all[i] == r) return static_cast<int>(i);
  }
  return -1;
}

std::array<double, 3> ligand_centroid(std::span<const FeaturizedAtom> atoms) {
  std::array<double, 3> sum{};
  int count = 0;
  for (const FeaturizedAtom& a : atoms) {
    if (a.features[kMolType] > 0.0f) {
      for (int k = 0; k < 3; ++k) sum[k] += a.position[k];
      ++count;
    }
  }
  if (count == 0) {
    throw DomainError("complex has no ligand atoms to center on");
  }
  for (int k = 0; k < 3; ++k) sum[k] /= count;
  return sum;
}

Grid voxelize(std::span<const FeaturizedAtom> atoms,
              const std::array<double, 3>& center, const GridParams& params) {
  params.validate();
  for (double c : center) {
    if (!std::isfinite(c)) throw DomainError("grid center is not finite");
  }
  const int d = params.points_per_axis();
  const int half = d / 2;

  Grid grid;
  grid.shape = {d, d, d, kFeatureCount};
  grid.data.assign(static_cast<size_t>(d) * d * d * kFeatureCount, 0.0f);

  for (const FeaturizedAtom& a : atoms) {
    int idx[3];
    bool inside = true;
    for (int k = 0; k < 3; ++k) {
      const double offset = (a.position[k] - center[k]) / params.resolution;
      idx[k] = round_half_away(offset) + half;
      if (idx[k] < 0 || idx[k] >= d) {
        inside = false;
        break;
      }
    }
    if (!inside) continue;
    float* cell = &grid.at(idx[0], idx[1], idx[2], 0);
    for (int c = 0; c < kFeatureCount; ++c) cell[c] += a.features[static_cast<size_t>(c)];
  }
  return grid;
}

std::vector<FeaturizedAtom> rotate_atoms(std::span<const FeaturizedAtom> atoms,
                                         const std::array<double, 3>& center,
                                         const CubeRotation& r) {
  std::vector<FeaturizedAtom> out(atoms.begin(), atoms.end());
  for (FeaturizedAtom& a : out) {
    const std::array<double, 3> offset = {a.position[0] - center[0],
                                          a.position[1] - center[1],
                                          a.position[2] - center[2]};
    const auto rotated = r.apply(offset);
    for (int k = 0; k < 3; ++k) a.position[k] = rotated[k] + center[k];
  }
  return out;
}

std::vector<OcclusionVariant> occlusion_variants(
    std::span<const FeaturizedAtom> atoms,
    const std::array<double, 3>& center) {
  std::vector<OcclusionVariant> variants;
  variants.reserve(kOcclusionVariantCount);
  const double start = -10.0;  // low corner of the first box, Å
  for (int ix = 0; ix < kOcclusionPositions; ++ix) {
    for (int iy = 0; iy < kOcclusionPositions; ++iy) {
      for (int iz = 0; iz < kOcclusionPositions; ++iz) {
        OcclusionVariant v;
        v.box_origin = {start + ix * kOcclusionStep,
                        start + iy * kOcclusionStep,
                        start + iz * kOcclusionStep};
        v.atoms.reserve(atoms.size());
        for (const FeaturizedAtom& a : atoms) {
          bool in_box = true;
          for (int k = 0; k < 3; ++k) {
            const double offset = a.position[k] - center[k];
            if (offset < v.box_origin[k] ||
                offset >= v.box_origin[k] + kOcclusionBoxSize) {
              in_box = false;
              break;
            }
          }
          if (!in_box) v.atoms.push_back(a);
        }
        variants.push_back(std::move(v));
      }
    }
  }
  return variants;
}

std::vector<float> rotate_cube_channels(std::span<const float> data, int d,
                                        int channels, const CubeRotation& r) {
  const size_t expected =
      static_cast<size_t>(d) * d * d * static_cast<size_t>(channels);
  if (data.size() != expected) {
    throw DomainError("feature map size does not match d^3 * channels");
  }
  std::vector<float> out(expected, 0.0f);
  const double h = (d - 1) / 2.0;  // array center; half-integer for even d
  for (int x = 0; x < d; ++x) {
    for (int y = 0; y < d; ++y) {
      for (int z = 0; z < d; ++z) {
        const std::array<double, 3> offset = {x - h, y - h, z - h};
        const auto rotated = r.apply(offset);
        const int nx = round_half_away(rotated[0] + h);
        const int ny = round_half_away(rotated[1] + h);
        const int nz = round_half_away(rotated[2] + h);
        const size_t src =
            static_cast<size_t>(((x * d + y) * d + z)) * static_cast<size_t>(channels);
        const size_t dst =
            static_cast<size_t>(((nx * d + ny) * d + nz)) * static_cast<size_t>(channels);
        for (int c = 0; c < channels; ++c) out[dst + static_cast<size_t>(c)] = data[src + static_cast<size_t>(c)];
      }
    }
  }
  return out;
}

Grid rotate_grid(const Grid& g, const CubeRotation& r) {
  Grid out = g;
  out.data = rotate_cube_channels(g.data, g.shape[0], g.shape[3], r);
  return out;
}

}  // namespace pafnucy
