#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace acqa {

// Writes content to a sibling temp file, then renames over the target.
void atomic_write_text(const std::filesystem::path& path, const std::string& content);

// FNV-1a 64 over file bytes, "fnv1a64:<hex>". Checkpoint directories digest
// their manifest.json + params.bin. Reproducibility bookkeeping, not
// cryptographic.
std::string file_digest(const std::filesystem::path& path);

} // namespace acqa
