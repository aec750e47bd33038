#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "chordvae/param_store.hpp"

namespace chordvae {

// Checkpoint file layout (little-endian):
//   "CVCK" | u32 version | u64 manifest bytes | manifest JSON
//   u32 tensor count | per tensor: u32 name bytes, name, u32 rank,
//   u64 dims[rank], f64 values
// The manifest carries "config_hash", compared by callers against the
// architecture they expect.
struct Checkpoint {
  nlohmann::json manifest;
  ParamStore params;
};

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& manifest);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws CheckpointMismatch unless manifest["config_hash"] == expected.
void require_config_hash(const nlohmann::json& manifest, const std::string& expected);

}  // namespace chordvae
