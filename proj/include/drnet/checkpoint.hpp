// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout: a text header terminated by a line "end", followed by the
// little-endian float32 payload.
//
//   drnet-checkpoint
//   version 1
//   mode train | fused | fused:<task>
//   config <canonical key=value tokens>
//   config_digest <16 hex digits>
//   tensors <count>
//   tensor <name> <rank> <extents...> <byte offset> <element count>
//   ...
//   payload_bytes <n>
//   payload_checksum <16 hex digits, FNV-1a 64 of the payload>
//   end

#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "drnet/model.hpp"

namespace drnet {

inline constexpr int kCheckpointVersion = 1;

using AnyModel = std::variant<DRNet, FusedDRNet>;

std::string serialize(const DRNet& model);
std::string serialize(const FusedDRNet& model);
/// Throws FormatError on any manifest, version, digest, size or checksum mismatch.
AnyModel deserialize(const std::string& bytes);

void save(const DRNet& model, const std::filesystem::path& path);
void save(const FusedDRNet& model, const std::filesystem::path& path);
AnyModel load(const std::filesystem::path& path);
/// Fusion is irreversible: a fused checkpoint is rejected with FormatError.
DRNet load_train(const std::filesystem::path& path);
FusedDRNet load_fused(const std::filesystem::path& path);

}  // namespace drnet
