#include "acqa/fsio.hpp"

#include <fstream>
#include <sstream>

#include "acqa/errors.hpp"
#include "acqa/rng.hpp"

namespace acqa {

namespace fs = std::filesystem;

void atomic_write_text(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) {
            throw DataError("atomic_write_text: cannot open " + tmp.string());
        }
        f << content;
        if (!f) {
            throw DataError("atomic_write_text: write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

namespace {

std::uint64_t raw_file_digest(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw DataError("file_digest: cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    return fnv1a64(buf.str());
}

} // namespace

std::string file_digest(const fs::path& path) {
    std::uint64_t h;
    if (fs::is_directory(path)) {
        h = raw_file_digest(path / "manifest.json");
        h ^= raw_file_digest(path / "params.bin") * 0x9e3779b97f4a7c15ULL;
    } else {
        h = raw_file_digest(path);
    }
    std::ostringstream os;
    os << "fnv1a64:" << std::hex << h;
    return os.str();
}

} // namespace acqa
