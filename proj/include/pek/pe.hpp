#pragma once

#include <cstdint>
#include <vector>

#include "pek/image.hpp"

// Keyed traditional perceptual encryption. Both schemes act on the integer
// domain [0,255]: images cross the boundary through round(v*255) and back by
// /255, which makes every transform an exact bijection and round trips
// bit-exact.
namespace pek::pe {

// One global key for all blocks and images: a permutation of the
// 3*block_size^2 color components of each block plus a value-reversal mask
// applied to the permuted components.
struct LeKey {
    std::uint64_t seed = 0;
    int block_size = 4;
    std::vector<std::uint32_t> perm;       // bijection on [0, 3*b*b)
    std::vector<std::uint8_t> reverse_mask;  // per destination component
};

// Per-block codes plus a global block-position shuffle; a fresh key per
// image is the caller's choice of seeds.
struct EtcKey {
    std::uint64_t seed = 0;
    int block_size = 8;
    int rows = 0, cols = 0;
    std::vector<std::uint32_t> block_perm;  // bijection on grid positions
    std::vector<std::uint8_t> rotation;     // per block, quarter turns cw, 0..3
    std::vector<std::uint8_t> flip;         // 0 none, 1 horizontal, 2 vertical
    std::vector<std::uint8_t> negpos;       // per block, bit c = channel c
    std::vector<std::uint8_t> rgb_perm;     // per block, 0..5
};

// The six permutations of (r,g,b), indexed by EtcKey::rgb_perm.
extern const int kRgbPerms[6][3];

LeKey le_keygen(std::uint64_t seed, int block_size = 4);
img::ImageTensor le_encrypt(const img::ImageTensor& image, const LeKey& key);
img::ImageTensor le_decrypt(const img::ImageTensor& image, const LeKey& key);

EtcKey etc_keygen(std::uint64_t seed, int rows, int cols, int block_size = 8);
img::ImageTensor etc_encrypt(const img::ImageTensor& image, const EtcKey& key);
img::ImageTensor etc_decrypt(const img::ImageTensor& image, const EtcKey& key);

}  // namespace pek::pe
