#include "pek/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pek::ckpt {

namespace {
void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}
std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}
}  // namespace

void save_blob(const std::string& path, const Blob& blob) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + path);

    nlohmann::json desc = blob.descriptor;
    nlohmann::json sizes = nlohmann::json::array();
    for (const auto& a : blob.arrays) sizes.push_back(a.size());
    desc["array_sizes"] = sizes;
    const std::string header = desc.dump();

    os.write(kMagic, sizeof(kMagic));
    write_u64(os, header.size());
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& a : blob.arrays)
        os.write(reinterpret_cast<const char*>(a.data()),
                 static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!os) throw std::runtime_error("checkpoint: write failed " + path);
}

Blob load_blob(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[sizeof(kMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint64_t hlen = read_u64(is);
    std::string header(hlen, '\0');
    is.read(header.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw std::runtime_error("checkpoint: truncated header " + path);

    Blob blob;
    blob.descriptor = nlohmann::json::parse(header);
    for (const auto& sz : blob.descriptor.at("array_sizes")) {
        std::vector<double> a(sz.get<std::size_t>());
        is.read(reinterpret_cast<char*>(a.data()),
                static_cast<std::streamsize>(a.size() * sizeof(double)));
        if (!is) throw std::runtime_error("checkpoint: truncated data " + path);
        blob.arrays.push_back(std::move(a));
    }
    return blob;
}

nlohmann::json inspect(const std::string& path) {
    return load_blob(path).descriptor;
}

}  // namespace pek::ckpt
