#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pafnucy/featurizer.hpp"

namespace pafnucy {

// Cubic crop geometry. The default 20-Å box at 1-Å resolution gives 21 grid
// points per axis (offsets -10..+10 with the center cell at index 10); that
// is the only geometry validated against reference behavior, but smaller
// boxes are used by reduced-size tests.
struct GridParams {
  double box_size = 20.0;   // Å, edge length
  double resolution = 1.0;  // Å per grid step

  int points_per_axis() const;
  void validate() const;
};

struct Grid {
  std::array<int, 4> shape{};  // (D, D, D, kFeatureCount)
  std::vector<float> data;     // row-major
  std::optional<double> label; // affinity pKa
  std::string id;

  float& at(int x, int y, int z, int c);
  float at(int x, int y, int z, int c) const;
};

// Proper rotation of the cube: integer orthogonal matrix, det +1.
struct CubeRotation {
  std::array<std::array<int, 3>, 3> m{};

  std::array<double, 3> apply(const std::array<double, 3>& v) const;
  CubeRotation transposed() const;  // = inverse for orthogonal matrices
  CubeRotation compose(const CubeRotation& other) const;  // this * other
  bool operator==(const CubeRotation&) const = default;
};

CubeRotation identity_rotation();

// The 24 proper rotations of the cube, in a fixed canonical order with the
// identity at index 0.
const std::vector<CubeRotation>& cube_rotations();

// Position of a rotation in cube_rotations(), or -1.
int cube_rotation_index(const CubeRotation& r);

// Geometric center of the ligand atoms (moltype +1). Throws DomainError
// when no ligand atom is present.
std::array<double, 3> ligand_centroid(std::span<const FeaturizedAtom> atoms);

// Discretizes atoms onto the grid: index = round(offset / resolution) +
// half, rounding half away from zero. Colliding atoms have their feature
// vectors summed; atoms outside the box are cropped silently.
Grid voxelize(std::span<const FeaturizedAtom> atoms,
              const std::array<double, 3>& center,
              const GridParams& params = {});

// position' = R (position - center) + center; features untouched.
std::vector<FeaturizedAtom> rotate_atoms(std::span<const FeaturizedAtom> atoms,
                                         const std::array<double, 3>& center,
                                         const CubeRotation& r);

struct OcclusionVariant {
  std::array<double, 3> box_origin{};  // low corner, Å relative to center
  std::vector<FeaturizedAtom> atoms;   // input with the box contents removed
};

// 343 corrupted inputs: a 5-Å cubic deletion box slid with a 3-Å step,
// 7 positions per axis starting at -10 Å, half-open on the high side.
std::vector<OcclusionVariant> occlusion_variants(
    std::span<const FeaturizedAtom> atoms,
    const std::array<double, 3>& center);

inline constexpr int kOcclusionVariantCount = 343;

// Spatially permutes a (d, d, d, channels) feature map by a cube rotation
// about the array center. Exact: every cell maps to exactly one cell.
std::vector<float> rotate_cube_channels(std::span<const float> data, int d,
                                        int channels, const CubeRotation& r);

// rotate_cube_channels applied to a Grid (used by equivariance checks).
Grid rotate_grid(const Grid& g, const CubeRotation& r);

}  // namespace pafnucy
