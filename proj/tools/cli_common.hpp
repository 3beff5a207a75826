#pragma once

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "pek/harness.hpp"
#include "pek/image.hpp"

namespace pek::cli {

inline std::vector<img::ImageTensor> load_dir(const std::string& dir) {
    std::vector<img::ImageTensor> out;
    for (const auto& p : img::list_image_files(dir))
        out.push_back(img::load_image(p));
    return out;
}

inline std::vector<std::string> stems_of(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& p : img::list_image_files(dir))
        out.push_back(std::filesystem::path(p).stem().string());
    return out;
}

// Uniform error-to-exit-code policy for all tools: bad usage or config is 2,
// a failing operation is 3.
template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const harness::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return harness::kExitConfigError;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return harness::kExitConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return harness::kExitStageError;
    }
}

}  // namespace pek::cli
