#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nuc/scgn.hpp"

namespace nuc {

// Checkpoint = directory with manifest.json (arch, seed, epoch, loss
// history) and one tensor container per parameter, named by dotted path
// ("blocks.0.sdgw.1.feat_conv.kernel.nt"). Writes go to a temp directory
// renamed into place.

struct CheckpointMeta {
  ArchConfig arch;
  uint64_t seed = 0;
  int epoch = 0;
  std::vector<double> loss_history;
};

void save_checkpoint(const std::string& dir, ModelParams& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
  ModelParams model;
  CheckpointMeta meta;
};

// `trainable` marks the loaded tensors as gradient-tracked leaves.
LoadedCheckpoint load_checkpoint(const std::string& dir, bool trainable = false);

void to_json(nlohmann::json& j, const ArchConfig& a);
void from_json(const nlohmann::json& j, ArchConfig& a);

}  // namespace nuc
