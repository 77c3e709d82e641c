#pragma once

#include <array>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pafnucy/dataset.hpp"
#include "pafnucy/network.hpp"
#include "pafnucy/voxelizer.hpp"

namespace pafnucy {

// Range statistics over all first-conv-layer weights attached to one input
// channel. Quartiles use linear interpolation over the sorted values.
struct ChannelWeightRange {
  std::string channel;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// One row per input channel, in the fixed 19-feature order.
std::vector<ChannelWeightRange> feature_importance(const Network& net);

struct OcclusionResult {
  std::array<double, 3> box_origin{};  // Å relative to the ligand centroid
  double prediction = 0.0;
  double drop = 0.0;  // baseline - prediction; negative values are kept
};

struct OcclusionScan {
  double baseline = 0.0;
  std::vector<OcclusionResult> results;  // 343, sweep order
};

// Rotates the complex, predicts the baseline, then predicts each of the 343
// deletion-box variants.
OcclusionScan occlusion_scan(const Network& net, const DatasetRecord& record,
                             const CubeRotation& rotation,
                             const GridParams& params = {});

// The k results with the largest drop, descending.
std::vector<OcclusionResult> top_drops(const OcclusionScan& scan, int k);

// 1 - cosine similarity, in [0, 2]; NaN when either vector has zero norm.
double cosine_distance(std::span<const float> a, std::span<const float> b);

struct LayerDistance {
  std::string layer;
  double aligned = 0.0;  // conv activations permuted back before comparing
  double raw = 0.0;      // NaN marks an undefined (zero-norm) distance
};

// Per-layer cosine distances (1 - cosine similarity) between the activation
// traces of the same complex in two orientations. Convolutional activations
// of the second orientation are spatially permuted back so cells correspond;
// dense layers need no alignment.
std::vector<LayerDistance> activation_comparison(const Network& net,
                                                 const DatasetRecord& record,
                                                 const CubeRotation& rot_a,
                                                 const CubeRotation& rot_b,
                                                 const GridParams& params = {});

struct StabilityRow {
  std::string id;
  std::array<double, 24> predictions{};  // cube_rotations() order
  double mean = 0.0;
  double stddev = 0.0;  // population form over the 24 values
};

std::vector<StabilityRow> rotation_stability(const Network& net,
                                             std::span<const DatasetRecord> records,
                                             const GridParams& params = {});

void write_importance_csv(std::ostream& out,
                          std::span<const ChannelWeightRange> rows);
// Header row, one baseline row with empty coordinates, then the 343 sweep
// rows.
void write_occlusion_csv(std::ostream& out, const OcclusionScan& scan);
void write_activation_csv(std::ostream& out,
                          std::span<const LayerDistance> rows);
void write_stability_csv(std::ostream& out,
                         std::span<const StabilityRow> rows);

}  // namespace pafnucy
