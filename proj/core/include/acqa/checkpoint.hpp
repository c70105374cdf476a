#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "acqa/graph.hpp"

namespace acqa {

// Self-describing checkpoint: a directory holding
//   manifest.json  {format_version, model_kind, hyperparameters, vocab,
//                   entries: [{name, shape, offset, length}]}
//   params.bin     little-endian float32, concatenated in manifest order.
// Offsets and lengths are in bytes. Writes are atomic (temp dir + rename).
struct CheckpointMeta {
    std::string model_kind; // "actor" | "critic"
    nlohmann::json hyperparameters;
    std::vector<std::string> vocab; // token at index i has id i
};

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::filesystem::path& dir, const CheckpointMeta& meta,
                     const ParamStore& params);

CheckpointMeta load_checkpoint(const std::filesystem::path& dir, ParamStore& params);

// Reads just the manifest (for kind/hyperparameter sniffing).
nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir);

} // namespace acqa
