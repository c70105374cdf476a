#include "acqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "acqa/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace acqa {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& dir, const CheckpointMeta& meta, const ParamStore& params) {
    const fs::path tmp = dir.string() + ".tmp";
    fs::remove_all(tmp);
    fs::create_directories(tmp);

    nlohmann::json manifest;
    manifest["format_version"] = kCheckpointFormatVersion;
    manifest["model_kind"] = meta.model_kind;
    manifest["hyperparameters"] = meta.hyperparameters;
    manifest["vocab"] = meta.vocab;

    nlohmann::json entries = nlohmann::json::array();
    std::size_t offset = 0;
    for (const auto& e : params.entries()) {
        const std::size_t length = e.value.numel() * sizeof(float);
        entries.push_back({{"name", e.name},
                           {"shape", e.value.shape},
                           {"offset", offset},
                           {"length", length}});
        offset += length;
    }
    manifest["entries"] = entries;

    {
        std::ofstream mf(tmp / "manifest.json", std::ios::binary);
        mf << manifest.dump(2) << "\n";
        if (!mf) {
            throw DataError("checkpoint: failed to write " + (tmp / "manifest.json").string());
        }
    }
    {
        std::ofstream pf(tmp / "params.bin", std::ios::binary);
        for (const auto& e : params.entries()) {
            pf.write(reinterpret_cast<const char*>(e.value.data.data()),
                     static_cast<std::streamsize>(e.value.numel() * sizeof(float)));
        }
        if (!pf) {
            throw DataError("checkpoint: failed to write " + (tmp / "params.bin").string());
        }
    }

    fs::remove_all(dir);
    fs::rename(tmp, dir);
}

nlohmann::json read_checkpoint_manifest(const fs::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) {
        throw DataError("checkpoint: cannot open " + (dir / "manifest.json").string());
    }
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint: malformed manifest.json in " + dir.string() + ": " + e.what());
    }
    return manifest;
}

CheckpointMeta load_checkpoint(const fs::path& dir, ParamStore& params) {
    const nlohmann::json manifest = read_checkpoint_manifest(dir);
    if (!manifest.contains("format_version") ||
        manifest["format_version"].get<int>() != kCheckpointFormatVersion) {
        throw DataError("checkpoint: unsupported format_version in " + dir.string());
    }

    CheckpointMeta meta;
    meta.model_kind = manifest.at("model_kind").get<std::string>();
    meta.hyperparameters = manifest.at("hyperparameters");
    meta.vocab = manifest.at("vocab").get<std::vector<std::string>>();

    std::ifstream pf(dir / "params.bin", std::ios::binary);
    if (!pf) {
        throw DataError("checkpoint: cannot open " + (dir / "params.bin").string());
    }

    for (const auto& entry : manifest.at("entries")) {
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<int>>();
        const auto offset = entry.at("offset").get<std::size_t>();
        const auto length = entry.at("length").get<std::size_t>();

        Tensor& t = params.has(name) ? params.value(name) : params.create(name, shape);
        if (t.shape != shape) {
            throw DataError("checkpoint: shape mismatch for '" + name + "' in " + dir.string());
        }
        if (length != t.numel() * sizeof(float)) {
            throw DataError("checkpoint: length mismatch for '" + name + "' in " + dir.string());
        }
        pf.seekg(static_cast<std::streamoff>(offset));
        pf.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(length));
        if (!pf) {
            throw DataError("checkpoint: truncated params.bin in " + dir.string());
        }
    }
    return meta;
}

} // namespace acqa
