#include "pafnucy/dataset.hpp"

#include <cmath>
#include <fstream>

#include "pafnucy/binio.hpp"

namespace pafnucy {
namespace {

constexpr char kMagic[4] = {'P', 'F', 'D', 'S'};
constexpr uint32_t kVersion = 1;

}  // namespace

const DatasetRecord* Dataset::find(const std::string& id) const {
  for (const DatasetRecord& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  write_bytes(out, kMagic, sizeof(kMagic));
  write_le<uint32_t>(out, kVersion);
  write_le<double>(out, ds.charge_scaler_std);
  write_le<uint64_t>(out, ds.records.size());
  for (const DatasetRecord& r : ds.records) {
    write_string(out, r.id);
    write_le<uint8_t>(out, r.affinity.has_value() ? 1 : 0);
    if (r.affinity) {
      if (!std::isfinite(*r.affinity)) {
        throw DomainError("record " + r.id + " has a non-finite affinity");
      }
      write_le<double>(out, *r.affinity);
    }
    write_le<uint64_t>(out, r.atoms.size());
    for (const FeaturizedAtom& a : r.atoms) {
      for (double c : a.position) write_le<double>(out, c);
      for (float f : a.features) write_le<float>(out, f);
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing dataset to " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());

  char magic[4];
  read_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a dataset file (bad magic): " + path.string());
  }
  const uint32_t version = read_le<uint32_t>(in, "version");
  if (version != kVersion) {
    throw IoError("unsupported dataset version " + std::to_string(version));
  }

  Dataset ds;
  ds.charge_scaler_std = read_le<double>(in, "charge scaler");
  const uint64_t n_records = read_le<uint64_t>(in, "record count");
  ds.records.reserve(n_records);
  for (uint64_t i = 0; i < n_records; ++i) {
    DatasetRecord r;
    r.id = read_string(in, "record id");
    const uint8_t has_affinity = read_le<uint8_t>(in, "affinity flag");
    if (has_affinity) r.affinity = read_le<double>(in, "affinity");
    const uint64_t n_atoms = read_le<uint64_t>(in, "atom count");
    r.atoms.reserve(n_atoms);
    for (uint64_t j = 0; j < n_atoms; ++j) {
      FeaturizedAtom a;
      for (double& c : a.position) c = read_le<double>(in, "coordinates");
      for (float& f : a.features) f = read_le<float>(in, "features");
      r.atoms.push_back(a);
    }
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace pafnucy
