#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pafnucy/featurizer.hpp"

namespace pafnucy {

// One featurized complex in pre-crop point form.
struct DatasetRecord {
  std::string id;
  std::vector<FeaturizedAtom> atoms;
  std::optional<double> affinity;  // pKa; absent for prediction-only sets
};

struct Dataset {
  double charge_scaler_std = 0.0;
  std::vector<DatasetRecord> records;

  const DatasetRecord* find(const std::string& id) const;
};

// Versioned little-endian container, magic "PFDS": scaler std, then per
// record id, optional affinity and the atom table (f64 coordinates,
// f32 features). Round-trips exactly.
void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace pafnucy
