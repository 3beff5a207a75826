#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace pek::ckpt {

// Versioned binary blob: magic, length-prefixed JSON descriptor, then raw
// little-endian double arrays in descriptor order. Shared by model and
// extractor checkpoints; `gan inspect` prints the descriptor.
inline constexpr char kMagic[8] = {'P', 'E', 'K', 'B', 'L', 'O', 'B', '1'};

struct Blob {
    nlohmann::json descriptor;
    std::vector<std::vector<double>> arrays;
};

void save_blob(const std::string& path, const Blob& blob);
Blob load_blob(const std::string& path);
nlohmann::json inspect(const std::string& path);  // descriptor only

}  // namespace pek::ckpt
