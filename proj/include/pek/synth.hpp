#pragma once

#include <cstdint>
#include <vector>

#include "pek/image.hpp"
#include "pek/rng.hpp"

namespace pek::img {

// Seeded generator of smooth synthetic RGB images: a random color gradient,
// a few soft blobs and a low-frequency wave. Stands in for natural photos in
// self-contained runs; every experiment config records the seed.
ImageTensor synth_image(rng::DetRng& rng, int h, int w);
std::vector<ImageTensor> synth_batch(std::uint64_t seed, int count, int h,
                                     int w);

}  // namespace pek::img
