#include "pafnucy/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pafnucy/errors.hpp"
#include "pafnucy/numfmt.hpp"

namespace pafnucy {
namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double pos = p * static_cast<double>(n - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, n - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

TensorF to_tensor(Grid&& g) {
  TensorF t;
  t.shape = {g.shape[0], g.shape[1], g.shape[2], g.shape[3]};
  t.values = std::move(g.data);
  return t;
}

double predict_atoms(const Network& net, std::span<const FeaturizedAtom> atoms,
                     const std::array<double, 3>& center,
                     const GridParams& params, ForwardTrace* trace = nullptr) {
  const TensorF grid = to_tensor(voxelize(atoms, center, params));
  return forward(net, grid, false, nullptr, trace);
}

}  // namespace

double cosine_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DomainError("cosine distance needs vectors of equal length");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<ChannelWeightRange> feature_importance(const Network& net) {
  const TensorF& w = net.conv_w.at(0);  // (K, K, K, Cin, Cout)
  const int cin = w.shape[3];
  const int cout = w.shape[4];
  const size_t taps = w.numel() / static_cast<size_t>(cin) / static_cast<size_t>(cout);

  std::vector<ChannelWeightRange> rows;
  rows.reserve(static_cast<size_t>(cin));
  for (int c = 0; c < cin; ++c) {
    std::vector<double> values;
    values.reserve(taps * static_cast<size_t>(cout));
    for (size_t tap = 0; tap < taps; ++tap) {
      const size_t base = (tap * static_cast<size_t>(cin) + static_cast<size_t>(c)) * static_cast<size_t>(cout);
      for (int co = 0; co < cout; ++co) {
        values.push_back(static_cast<double>(w.values[base + static_cast<size_t>(co)]));
      }
    }
    std::sort(values.begin(), values.end());
    ChannelWeightRange row;
    row.channel = cin == kFeatureCount
                      ? std::string(feature_names()[static_cast<size_t>(c)])
                      : "ch" + std::to_string(c);
    row.min = values.front();
    row.q1 = quantile_sorted(values, 0.25);
    row.median = quantile_sorted(values, 0.5);
    row.q3 = quantile_sorted(values, 0.75);
    row.max = values.back();
    rows.push_back(std::move(row));
  }
  return rows;
}

OcclusionScan occlusion_scan(const Network& net, const DatasetRecord& record,
                             const CubeRotation& rotation,
                             const GridParams& params) {
  const auto center = ligand_centroid(record.atoms);
  const auto rotated = rotate_atoms(record.atoms, center, rotation);

  OcclusionScan scan;
  scan.baseline = predict_atoms(net, rotated, center, params);
  const auto variants = occlusion_variants(rotated, center);
  scan.results.reserve(variants.size());
  for (const OcclusionVariant& v : variants) {
    OcclusionResult r;
    r.box_origin = v.box_origin;
    // an untouched variant is the identical input, so the drop is exactly 0
    if (v.atoms.size() == rotated.size()) {
      r.prediction = scan.baseline;
      r.drop = 0.0;
    } else {
      r.prediction = predict_atoms(net, v.atoms, center, params);
      r.drop = scan.baseline - r.prediction;
    }
    scan.results.push_back(r);
  }
  return scan;
}

std::vector<OcclusionResult> top_drops(const OcclusionScan& scan, int k) {
  std::vector<OcclusionResult> sorted(scan.results.begin(),
                                      scan.results.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const OcclusionResult& a, const OcclusionResult& b) {
                     return a.drop > b.drop;
                   });
  if (k < static_cast<int>(sorted.size())) {
    sorted.resize(static_cast<size_t>(k));
  }
  return sorted;
}

std::vector<LayerDistance> activation_comparison(const Network& net,
                                                 const DatasetRecord& record,
                                                 const CubeRotation& rot_a,
                                                 const CubeRotation& rot_b,
                                                 const GridParams& params) {
  const auto center = ligand_centroid(record.atoms);
  ForwardTrace trace_a, trace_b;
  predict_atoms(net, rotate_atoms(record.atoms, center, rot_a), center, params,
                &trace_a);
  predict_atoms(net, rotate_atoms(record.atoms, center, rot_b), center, params,
                &trace_b);

  // Permutation mapping orientation b's spatial cells onto orientation a's:
  // undo rot_b, then apply rot_a.
  const CubeRotation align = rot_a.compose(rot_b.transposed());

  std::vector<LayerDistance> rows;
  rows.reserve(trace_a.size());
  for (size_t i = 0; i < trace_a.size(); ++i) {
    const TraceEntry& a = trace_a[i];
    const TraceEntry& b = trace_b[i];
    LayerDistance row;
    row.layer = a.name;
    row.raw = cosine_distance(a.values, b.values);
    if (a.spatial > 0) {
      const int channels = a.dims[3];
      const auto permuted =
          rotate_cube_channels(b.values, a.spatial, channels, align);
      row.aligned = cosine_distance(a.values, permuted);
    } else {
      row.aligned = row.raw;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<StabilityRow> rotation_stability(const Network& net,
                                             std::span<const DatasetRecord> records,
                                             const GridParams& params) {
  const auto& rotations = cube_rotations();
  std::vector<StabilityRow> rows;
  rows.reserve(records.size());
  for (const DatasetRecord& record : records) {
    const auto center = ligand_centroid(record.atoms);
    StabilityRow row;
    row.id = record.id;
    double sum = 0.0;
    for (size_t r = 0; r < rotations.size(); ++r) {
      const auto rotated = rotate_atoms(record.atoms, center, rotations[r]);
      row.predictions[r] = predict_atoms(net, rotated, center, params);
      sum += row.predictions[r];
    }
    row.mean = sum / static_cast<double>(rotations.size());
    double var = 0.0;
    for (double p : row.predictions) {
      var += (p - row.mean) * (p - row.mean);
    }
    row.stddev = std::sqrt(var / static_cast<double>(rotations.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_importance_csv(std::ostream& out,
                          std::span<const ChannelWeightRange> rows) {
  out << "channel,min,q1,median,q3,max\n";
  for (const ChannelWeightRange& r : rows) {
    out << r.channel << "," << format_double(r.min) << ","
        << format_double(r.q1) << "," << format_double(r.median) << ","
        << format_double(r.q3) << "," << format_double(r.max) << "\n";
  }
}

void write_occlusion_csv(std::ostream& out, const OcclusionScan& scan) {
  out << "x,y,z,prediction,drop\n";
  out << ",,," << format_double(scan.baseline) << ",0\n";
  for (const OcclusionResult& r : scan.results) {
    out << format_double(r.box_origin[0]) << ","
        << format_double(r.box_origin[1]) << ","
        << format_double(r.box_origin[2]) << ","
        << format_double(r.prediction) << "," << format_double(r.drop)
        << "\n";
  }
}

void write_activation_csv(std::ostream& out,
                          std::span<const LayerDistance> rows) {
  out << "layer,distance_aligned,distance_raw\n";
  for (const LayerDistance& r : rows) {
    out << r.layer << "," << format_double(r.aligned) << ","
        << format_double(r.raw) << "\n";
  }
}

void write_stability_csv(std::ostream& out,
                         std::span<const StabilityRow> rows) {
  out << "id";
  for (int i = 0; i < 24; ++i) out << ",rot" << i;
  out << ",mean,std\n";
  for (const StabilityRow& r : rows) {
    out << r.id;
    for (double p : r.predictions) out << "," << format_double(p);
    out << "," << format_double(r.mean) << "," << format_double(r.stddev)
        << "\n";
  }
}

}  // namespace pafnucy
