#pragma once

// Single-file binary checkpoint:
//   magic "VMSK1" | uint32 LE header length | UTF-8 JSON header | packed
//   64-bit LE floats per the header's tensor manifest.
// The header carries format_version, the manifest (name/shape/offset, offsets
// relative to the data section and strictly increasing), a vocab fingerprint,
// the echoed run config, the checkpoint epoch and its dev accuracy.

#include <string>

#include "vmask/config.hpp"
#include "vmask/models.hpp"
#include "vmask/trainer.hpp"

namespace vmask::ckpt {

struct CheckpointFile {
  trainer::Checkpoint state;
  nlohmann::json run_config;
};

void save(const std::string& path, const trainer::Checkpoint& state,
          const nlohmann::json& run_config);

CheckpointFile load(const std::string& path);

// Rebuilds the model a checkpoint describes (spec + strategy from the embedded
// config, vocab size and class count from the manifest) and restores its
// tensors.
models::Model rebuild_model(const CheckpointFile& file);

}  // namespace vmask::ckpt
