#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pek/tensor.hpp"

namespace pek::img {

// H x W x C image, channel-last, values in [0,1]. The universal currency of
// the toolkit; every scheme and model converts at its own boundary.
struct ImageTensor {
    int height = 0, width = 0, channels = 0;
    std::vector<double> data;  // HWC

    ImageTensor() = default;
    ImageTensor(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, 0.0) {
        if (h < 1 || w < 1 || (c != 1 && c != 3))
            throw std::invalid_argument("ImageTensor: bad dimensions");
    }

    double& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const ImageTensor& o) const {
        return height == o.height && width == o.width &&
               channels == o.channels;
    }
    std::size_t size() const { return data.size(); }
};

// Throws unless every value is finite and in [0,1].
void validate(const ImageTensor& img, const char* who);

// Row-major partition of an image into square blocks.
struct BlockGrid {
    int block_size = 0;
    int rows = 0, cols = 0;
    std::vector<ImageTensor> blocks;  // row-major, each block_size^2 x C
    int origin_height = 0, origin_width = 0, origin_channels = 0;
};

BlockGrid to_blocks(const ImageTensor& img, int block_size);
ImageTensor from_blocks(const BlockGrid& grid);

// Deterministic bilinear resize (half-pixel centers).
ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w);

// File I/O. PNG read/write, JPEG read-only. Values map by v = byte/255 on
// load and byte = round(v*255) on save; save rejects values outside [0,1].
ImageTensor load_image(const std::string& path,
                       std::optional<std::pair<int, int>> target = {});
void save_image(const ImageTensor& img, const std::string& path);

// Sorted png/jpeg paths directly under dir; throws if none.
std::vector<std::string> list_image_files(const std::string& dir);

// mkdir -p for the directory containing path (no-op without a parent).
void ensure_parent_dir(const std::string& path);

// NCHW <-> HWC conversions used at every model boundary.
core::Tensor to_tensor(const ImageTensor& img);
core::Tensor to_tensor(const std::vector<ImageTensor>& batch);
ImageTensor from_tensor(const core::Tensor& t, int n_index = 0,
                        bool clamp01 = true);

// Quantization helpers shared with the integer-domain ciphers.
inline int to_byte(double v) {
    const int q = static_cast<int>(std::lround(v * 255.0));
    return q < 0 ? 0 : (q > 255 ? 255 : q);
}
inline double from_byte(int b) { return static_cast<double>(b) / 255.0; }

}  // namespace pek::img
