#include "pek/synth.hpp"

#include <cmath>

namespace pek::img {

// A shared luminance field (gradient + soft blobs + low-frequency wave) with
// a milder per-channel tint on top, mirroring the strong cross-channel
// correlation of natural photos.
ImageTensor synth_image(rng::DetRng& rng, int h, int w) {
    ImageTensor img(h, w, 3);
    constexpr double kTau = 6.28318530717958647692;

    const double theta = rng.uniform(0.0, kTau);
    const double gx = std::cos(theta), gy = std::sin(theta);
    const double base = rng.uniform(0.3, 0.7);
    const double slope = rng.uniform(-0.5, 0.5);

    const int n_blobs = 2 + static_cast<int>(rng.uniform_index(4));
    struct Blob {
        double cy, cx, r, amp;
    };
    std::vector<Blob> blobs(n_blobs);
    for (auto& b : blobs) {
        b.cy = rng.uniform(0.1, 0.9) * h;
        b.cx = rng.uniform(0.1, 0.9) * w;
        b.r = rng.uniform(0.12, 0.35) * std::min(h, w);
        b.amp = rng.uniform(-0.45, 0.45);
    }

    const double wf = rng.uniform(0.5, 1.5);
    const double wphase = rng.uniform(0.0, kTau);
    const double wamp = rng.uniform(0.0, 0.12);

    // Per-channel tint: small offset plus a gentle gradient of its own.
    double tint_base[3], tint_slope[3];
    const double tint_theta = rng.uniform(0.0, kTau);
    const double tx = std::cos(tint_theta), ty = std::sin(tint_theta);
    for (int c = 0; c < 3; ++c) {
        tint_base[c] = rng.uniform(-0.08, 0.08);
        tint_slope[c] = rng.uniform(-0.12, 0.12);
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double u = (x + 0.5) / w - 0.5;
            const double v = (y + 0.5) / h - 0.5;
            double lum = base + slope * (u * gx + v * gy) +
                         wamp * std::sin(kTau * wf * (u + v) + wphase);
            for (const auto& b : blobs) {
                const double dy = y - b.cy, dx = x - b.cx;
                lum += b.amp * std::exp(-(dy * dy + dx * dx) / (b.r * b.r));
            }
            for (int c = 0; c < 3; ++c) {
                double val =
                    lum + tint_base[c] + tint_slope[c] * (u * tx + v * ty);
                if (val < 0.0) val = 0.0;
                if (val > 1.0) val = 1.0;
                img.at(y, x, c) = val;
            }
        }
    }
    return img;
}

std::vector<ImageTensor> synth_batch(std::uint64_t seed, int count, int h,
                                     int w) {
    rng::DetRng rng(seed);
    std::vector<ImageTensor> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(synth_image(rng, h, w));
    return out;
}

}  // namespace pek::img
