#pragma once

#include <cstdint>
#include <string>

#include "ngf/field.hpp"

namespace ngf {

/// Binary checkpoint: magic "NGF1", then per-tensor records of
/// (uint32 name length, name, uint32 rank, int64 dims, little-endian
/// float64 values). Step and config hash travel as reserved "__meta.*"
/// records.
void save_checkpoint(const std::string& path, const ParamList& params,
                     std::int64_t step, std::uint64_t config_hash);

struct CheckpointContents {
  ParamList params;
  std::int64_t step = 0;
  std::uint64_t config_hash = 0;
};

CheckpointContents load_checkpoint(const std::string& path);

/// Copies loaded values into a freshly built model's parameters by name.
void restore_params(const CheckpointContents& ckpt, ParamList& target);

/// FNV-1a over a canonical string, used to tie checkpoints to configs.
std::uint64_t fnv1a_hash(const std::string& s);

}  // namespace ngf
