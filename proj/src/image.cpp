#include "pek/image.hpp"

#include <cmath>
#include <stdexcept>

namespace pek::img {

void validate(const ImageTensor& img, const char* who) {
    if (img.height < 1 || img.width < 1 ||
        (img.channels != 1 && img.channels != 3))
        throw std::invalid_argument(std::string(who) + ": bad image shape");
    for (double v : img.data)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw std::invalid_argument(std::string(who) +
                                        ": value outside [0,1]");
}

BlockGrid to_blocks(const ImageTensor& img, int block_size) {
    if (block_size < 1) throw std::invalid_argument("to_blocks: block_size < 1");
    if (img.height % block_size != 0 || img.width % block_size != 0)
        throw std::invalid_argument(
            "to_blocks: block_size does not divide image dimensions");
    BlockGrid g;
    g.block_size = block_size;
    g.rows = img.height / block_size;
    g.cols = img.width / block_size;
    g.origin_height = img.height;
    g.origin_width = img.width;
    g.origin_channels = img.channels;
    g.blocks.reserve(static_cast<std::size_t>(g.rows) * g.cols);
    for (int by = 0; by < g.rows; ++by)
        for (int bx = 0; bx < g.cols; ++bx) {
            ImageTensor b(block_size, block_size, img.channels);
            for (int y = 0; y < block_size; ++y)
                for (int x = 0; x < block_size; ++x)
                    for (int c = 0; c < img.channels; ++c)
                        b.at(y, x, c) = img.at(by * block_size + y,
                                               bx * block_size + x, c);
            g.blocks.push_back(std::move(b));
        }
    return g;
}

ImageTensor from_blocks(const BlockGrid& g) {
    if (g.rows < 1 || g.cols < 1 || g.block_size < 1)
        throw std::invalid_argument("from_blocks: bad grid");
    if (g.blocks.size() != static_cast<std::size_t>(g.rows) * g.cols)
        throw std::invalid_argument("from_blocks: block count mismatch");
    if (g.origin_height != g.rows * g.block_size ||
        g.origin_width != g.cols * g.block_size)
        throw std::invalid_argument("from_blocks: origin shape inconsistent");
    ImageTensor img(g.origin_height, g.origin_width, g.origin_channels);
    for (int by = 0; by < g.rows; ++by)
        for (int bx = 0; bx < g.cols; ++bx) {
            const ImageTensor& b = g.blocks[by * g.cols + bx];
            if (b.height != g.block_size || b.width != g.block_size ||
                b.channels != g.origin_channels)
                throw std::invalid_argument("from_blocks: block shape mismatch");
            for (int y = 0; y < g.block_size; ++y)
                for (int x = 0; x < g.block_size; ++x)
                    for (int c = 0; c < g.origin_channels; ++c)
                        img.at(by * g.block_size + y, bx * g.block_size + x,
                               c) = b.at(y, x, c);
        }
    return img;
}

ImageTensor resize_bilinear(const ImageTensor& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("resize: zero-sized target");
    if (out_h == img.height && out_w == img.width) return img;
    ImageTensor out(out_h, out_w, img.channels);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        if (fy < 0) fy = 0;
        if (fy > img.height - 1) fy = img.height - 1;
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            if (fx < 0) fx = 0;
            if (fx > img.width - 1) fx = img.width - 1;
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = fx - x0;
            for (int c = 0; c < img.channels; ++c) {
                const double top = img.at(y0, x0, c) * (1 - wx) +
                                   img.at(y0, x1, c) * wx;
                const double bot = img.at(y1, x0, c) * (1 - wx) +
                                   img.at(y1, x1, c) * wx;
                double v = top * (1 - wy) + bot * wy;
                if (v < 0) v = 0;
                if (v > 1) v = 1;
                out.at(y, x, c) = v;
            }
        }
    }
    return out;
}

core::Tensor to_tensor(const ImageTensor& img) {
    core::Tensor t(1, img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.at(0, c, y, x) = img.at(y, x, c);
    return t;
}

core::Tensor to_tensor(const std::vector<ImageTensor>& batch) {
    if (batch.empty()) throw std::invalid_argument("to_tensor: empty batch");
    const ImageTensor& f = batch.front();
    core::Tensor t(static_cast<int>(batch.size()), f.channels, f.height,
                   f.width);
    for (std::size_t n = 0; n < batch.size(); ++n) {
        if (!batch[n].same_shape(f))
            throw std::invalid_argument("to_tensor: ragged batch");
        for (int c = 0; c < f.channels; ++c)
            for (int y = 0; y < f.height; ++y)
                for (int x = 0; x < f.width; ++x)
                    t.at(static_cast<int>(n), c, y, x) = batch[n].at(y, x, c);
    }
    return t;
}

ImageTensor from_tensor(const core::Tensor& t, int n_index, bool clamp01) {
    if (n_index < 0 || n_index >= t.n)
        throw std::invalid_argument("from_tensor: batch index out of range");
    ImageTensor img(t.h, t.w, t.c);
    for (int c = 0; c < t.c; ++c)
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) {
                double v = t.at(n_index, c, y, x);
                if (clamp01) v = v < 0 ? 0 : (v > 1 ? 1 : v);
                img.at(y, x, c) = v;
            }
    return img;
}

}  // namespace pek::img
