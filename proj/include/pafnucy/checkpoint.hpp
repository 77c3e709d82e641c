#pragma once

#include <filesystem>

#include "pafnucy/network.hpp"

namespace pafnucy {

// Versioned little-endian container, magic "PFNC": config block, charge-
// scaler std, per-parameter shape + float32 payload, optional Adam state.
void save_checkpoint(const Network& net, const std::filesystem::path& path,
                     bool include_adam = true);

// Validates magic, version and every tensor shape; throws IoError on
// truncation and ConfigError naming the offending layer on mismatch.
Network load_checkpoint(const std::filesystem::path& path);

// Reads only the charge-scaler std (cheap config cross-checks).
double read_checkpoint_scaler_std(const std::filesystem::path& path);

}  // namespace pafnucy
