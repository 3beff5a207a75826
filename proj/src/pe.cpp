#include "pek/pe.hpp"

#include <stdexcept>

#include "pek/rng.hpp"

namespace pek::pe {

const int kRgbPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                             {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

namespace {

using Bytes = std::vector<int>;

Bytes image_to_bytes(const img::ImageTensor& image) {
    Bytes out(image.data.size());
    for (std::size_t i = 0; i < image.data.size(); ++i)
        out[i] = img::to_byte(image.data[i]);
    return out;
}

img::ImageTensor bytes_to_image(const Bytes& bytes, int h, int w, int c) {
    img::ImageTensor out(h, w, c);
    for (std::size_t i = 0; i < bytes.size(); ++i)
        out.data[i] = img::from_byte(bytes[i]);
    return out;
}

void check_le(const img::ImageTensor& image, const LeKey& key) {
    if (image.channels != 3)
        throw std::invalid_argument("le: expects 3-channel images");
    if (image.height % key.block_size != 0 ||
        image.width % key.block_size != 0)
        throw std::invalid_argument("le: block size does not divide image");
}

void check_etc(const img::ImageTensor& image, const EtcKey& key) {
    if (image.channels != 3)
        throw std::invalid_argument("etc: expects 3-channel images");
    if (image.height != key.rows * key.block_size ||
        image.width != key.cols * key.block_size)
        throw std::invalid_argument("etc: key grid does not match image");
}

// Component order within a block: channel-major, then row-major pixels.
inline int comp_index(int c, int y, int x, int b) { return c * b * b + y * b + x; }

}  // namespace

LeKey le_keygen(std::uint64_t seed, int block_size) {
    if (block_size < 1) throw std::invalid_argument("le_keygen: block_size < 1");
    LeKey key;
    key.seed = seed;
    key.block_size = block_size;
    rng::DetRng rng(seed);
    const std::uint32_t n = static_cast<std::uint32_t>(3 * block_size * block_size);
    key.perm = rng.permutation(n);
    key.reverse_mask.resize(n);
    for (auto& m : key.reverse_mask) m = rng.bernoulli() ? 1 : 0;
    return key;
}

img::ImageTensor le_encrypt(const img::ImageTensor& image, const LeKey& key) {
    check_le(image, key);
    const int b = key.block_size;
    const int nc = 3 * b * b;
    Bytes bytes = image_to_bytes(image);
    Bytes out(bytes.size());
    std::vector<int> comps(nc), enc(nc);
    for (int by = 0; by < image.height / b; ++by)
        for (int bx = 0; bx < image.width / b; ++bx) {
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < b; ++y)
                    for (int x = 0; x < b; ++x)
                        comps[comp_index(c, y, x, b)] = bytes
                            [((static_cast<std::size_t>(by * b + y)) * image.width +
                              bx * b + x) * 3 + c];
            for (int i = 0; i < nc; ++i) {
                int v = comps[key.perm[i]];
                if (key.reverse_mask[i]) v = 255 - v;
                enc[i] = v;
            }
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < b; ++y)
                    for (int x = 0; x < b; ++x)
                        out[((static_cast<std::size_t>(by * b + y)) * image.width +
                             bx * b + x) * 3 + c] = enc[comp_index(c, y, x, b)];
        }
    return bytes_to_image(out, image.height, image.width, 3);
}

img::ImageTensor le_decrypt(const img::ImageTensor& image, const LeKey& key) {
    check_le(image, key);
    const int b = key.block_size;
    const int nc = 3 * b * b;
    Bytes bytes = image_to_bytes(image);
    Bytes out(bytes.size());
    std::vector<int> comps(nc), dec(nc);
    for (int by = 0; by < image.height / b; ++by)
        for (int bx = 0; bx < image.width / b; ++bx) {
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < b; ++y)
                    for (int x = 0; x < b; ++x)
                        comps[comp_index(c, y, x, b)] = bytes
                            [((static_cast<std::size_t>(by * b + y)) * image.width +
                              bx * b + x) * 3 + c];
            for (int i = 0; i < nc; ++i) {
                int v = comps[i];
                if (key.reverse_mask[i]) v = 255 - v;
                dec[key.perm[i]] = v;
            }
            for (int c = 0; c < 3; ++c)
                for (int y = 0; y < b; ++y)
                    for (int x = 0; x < b; ++x)
                        out[((static_cast<std::size_t>(by * b + y)) * image.width +
                             bx * b + x) * 3 + c] = dec[comp_index(c, y, x, b)];
        }
    return bytes_to_image(out, image.height, image.width, 3);
}

EtcKey etc_keygen(std::uint64_t seed, int rows, int cols, int block_size) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("etc_keygen: grid must be >= 1x1");
    if (block_size < 1)
        throw std::invalid_argument("etc_keygen: block_size < 1");
    EtcKey key;
    key.seed = seed;
    key.block_size = block_size;
    key.rows = rows;
    key.cols = cols;
    rng::DetRng rng(seed);
    const std::uint32_t n = static_cast<std::uint32_t>(rows * cols);
    key.block_perm = rng.permutation(n);
    key.rotation.resize(n);
    key.flip.resize(n);
    key.negpos.resize(n);
    key.rgb_perm.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        key.rotation[i] = static_cast<std::uint8_t>(rng.uniform_index(4));
        key.flip[i] = static_cast<std::uint8_t>(rng.uniform_index(3));
        key.negpos[i] = static_cast<std::uint8_t>(rng.uniform_index(8));
        key.rgb_perm[i] = static_cast<std::uint8_t>(rng.uniform_index(6));
    }
    return key;
}

namespace {

// Block pixel buffer: b*b*3 ints, HWC within the block.
using Block = std::vector<int>;

inline int bidx(int y, int x, int c, int b) { return (y * b + x) * 3 + c; }

Block rotate_cw(const Block& in, int b, int quarter_turns) {
    Block cur = in;
    for (int t = 0; t < quarter_turns; ++t) {
        Block next(cur.size());
        // 90 degrees clockwise: out(y, x) = in(b-1-x, y)
        for (int y = 0; y < b; ++y)
            for (int x = 0; x < b; ++x)
                for (int c = 0; c < 3; ++c)
                    next[bidx(y, x, c, b)] = cur[bidx(b - 1 - x, y, c, b)];
        cur = std::move(next);
    }
    return cur;
}

Block flip_block(const Block& in, int b, int mode) {
    if (mode == 0) return in;
    Block out(in.size());
    for (int y = 0; y < b; ++y)
        for (int x = 0; x < b; ++x)
            for (int c = 0; c < 3; ++c) {
                const int sy = mode == 2 ? b - 1 - y : y;
                const int sx = mode == 1 ? b - 1 - x : x;
                out[bidx(y, x, c, b)] = in[bidx(sy, sx, c, b)];
            }
    return out;
}

Block negpos_block(const Block& in, int b, int mask) {
    Block out = in;
    for (int y = 0; y < b; ++y)
        for (int x = 0; x < b; ++x)
            for (int c = 0; c < 3; ++c)
                if (mask & (1 << c)) out[bidx(y, x, c, b)] = 255 - out[bidx(y, x, c, b)];
    return out;
}

Block rgb_permute(const Block& in, int b, const int p[3]) {
    Block out(in.size());
    for (int y = 0; y < b; ++y)
        for (int x = 0; x < b; ++x)
            for (int c = 0; c < 3; ++c)
                out[bidx(y, x, c, b)] = in[bidx(y, x, p[c], b)];
    return out;
}

std::vector<Block> split_blocks(const Bytes& bytes, int h, int w, int b) {
    const int rows = h / b, cols = w / b;
    std::vector<Block> blocks(static_cast<std::size_t>(rows) * cols,
                              Block(static_cast<std::size_t>(b) * b * 3));
    for (int by = 0; by < rows; ++by)
        for (int bx = 0; bx < cols; ++bx) {
            Block& blk = blocks[by * cols + bx];
            for (int y = 0; y < b; ++y)
                for (int x = 0; x < b; ++x)
                    for (int c = 0; c < 3; ++c)
                        blk[bidx(y, x, c, b)] =
                            bytes[((static_cast<std::size_t>(by * b + y)) * w +
                                   bx * b + x) * 3 + c];
        }
    return blocks;
}

Bytes join_blocks(const std::vector<Block>& blocks, int h, int w, int b) {
    const int rows = h / b, cols = w / b;
    Bytes bytes(static_cast<std::size_t>(h) * w * 3);
    for (int by = 0; by < rows; ++by)
        for (int bx = 0; bx < cols; ++bx) {
            const Block& blk = blocks[by * cols + bx];
            for (int y = 0; y < b; ++y)
                for (int x = 0; x < b; ++x)
                    for (int c = 0; c < 3; ++c)
                        bytes[((static_cast<std::size_t>(by * b + y)) * w +
                               bx * b + x) * 3 + c] = blk[bidx(y, x, c, b)];
        }
    return bytes;
}

}  // namespace

img::ImageTensor etc_encrypt(const img::ImageTensor& image, const EtcKey& key) {
    check_etc(image, key);
    const int b = key.block_size;
    Bytes bytes = image_to_bytes(image);
    std::vector<Block> blocks = split_blocks(bytes, image.height, image.width, b);
    const std::size_t n = blocks.size();

    // Per-block transforms, keyed by the source position; fixed order:
    // rotate, flip, negative-positive, color permutation.
    for (std::size_t i = 0; i < n; ++i) {
        Block blk = rotate_cw(blocks[i], b, key.rotation[i]);
        blk = flip_block(blk, b, key.flip[i]);
        blk = negpos_block(blk, b, key.negpos[i]);
        blk = rgb_permute(blk, b, kRgbPerms[key.rgb_perm[i]]);
        blocks[i] = std::move(blk);
    }
    // Global block shuffle: output position i receives block block_perm[i].
    std::vector<Block> shuffled(n);
    for (std::size_t i = 0; i < n; ++i) shuffled[i] = blocks[key.block_perm[i]];

    return bytes_to_image(join_blocks(shuffled, image.height, image.width, b),
                          image.height, image.width, 3);
}

img::ImageTensor etc_decrypt(const img::ImageTensor& image, const EtcKey& key) {
    check_etc(image, key);
    const int b = key.block_size;
    Bytes bytes = image_to_bytes(image);
    std::vector<Block> shuffled = split_blocks(bytes, image.height, image.width, b);
    const std::size_t n = shuffled.size();

    std::vector<Block> blocks(n);
    for (std::size_t i = 0; i < n; ++i) blocks[key.block_perm[i]] = shuffled[i];

    for (std::size_t i = 0; i < n; ++i) {
        // Inverse per-block ops in reverse order.
        const int p = key.rgb_perm[i];
        int inv_p[3];
        for (int c = 0; c < 3; ++c) inv_p[kRgbPerms[p][c]] = c;
        Block blk = rgb_permute(blocks[i], b, inv_p);
        blk = negpos_block(blk, b, key.negpos[i]);
        blk = flip_block(blk, b, key.flip[i]);
        blk = rotate_cw(blk, b, (4 - key.rotation[i]) % 4);
        blocks[i] = std::move(blk);
    }
    return bytes_to_image(join_blocks(blocks, image.height, image.width, b),
                          image.height, image.width, 3);
}

}  // namespace pek::pe
