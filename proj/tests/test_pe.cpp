#include <doctest.h>

#include "pek/pe.hpp"
#include "test_util.hpp"

using namespace pek;

namespace {

// Integer image helpers for the exactness checks.
std::vector<int> to_bytes(const img::ImageTensor& im) {
    std::vector<int> b(im.data.size());
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = img::to_byte(im.data[i]);
    return b;
}

bool byte_equal(const img::ImageTensor& a, const img::ImageTensor& b) {
    return to_bytes(a) == to_bytes(b);
}

// Quantized copy so encrypted/decrypted comparisons are byte-exact from the
// start.
img::ImageTensor quantized_random(rng::DetRng& rng, int h, int w) {
    img::ImageTensor im = test::random_image(rng, h, w);
    for (auto& v : im.data) v = img::from_byte(img::to_byte(v));
    return im;
}

pe::LeKey identity_le_key(int block_size) {
    pe::LeKey k;
    k.block_size = block_size;
    const int n = 3 * block_size * block_size;
    k.perm.resize(n);
    for (int i = 0; i < n; ++i) k.perm[i] = i;
    k.reverse_mask.assign(n, 0);
    return k;
}

pe::EtcKey identity_etc_key(int rows, int cols, int block_size) {
    pe::EtcKey k;
    k.block_size = block_size;
    k.rows = rows;
    k.cols = cols;
    const int n = rows * cols;
    k.block_perm.resize(n);
    for (int i = 0; i < n; ++i) k.block_perm[i] = i;
    k.rotation.assign(n, 0);
    k.flip.assign(n, 0);
    k.negpos.assign(n, 0);
    k.rgb_perm.assign(n, 0);
    return k;
}

}  // namespace

TEST_CASE("le_keygen determinism and structure") {
    const pe::LeKey a = pe::le_keygen(0, 4);
    const pe::LeKey b = pe::le_keygen(0, 4);
    CHECK(a.perm == b.perm);
    CHECK(a.reverse_mask == b.reverse_mask);
    CHECK(a.perm.size() == 48);  // 3 * 4 * 4

    const pe::LeKey c = pe::le_keygen(1, 4);
    CHECK(a.perm != c.perm);

    // Permutation is a bijection.
    std::vector<bool> seen(a.perm.size(), false);
    for (auto p : a.perm) {
        REQUIRE(p < a.perm.size());
        CHECK(!seen[p]);
        seen[p] = true;
    }
}

TEST_CASE("le identity key is the identity map") {
    rng::DetRng rng(21);
    const img::ImageTensor im = quantized_random(rng, 16, 16);
    const pe::LeKey k = identity_le_key(4);
    CHECK(byte_equal(pe::le_encrypt(im, k), im));
    CHECK(byte_equal(pe::le_decrypt(im, k), im));
}

TEST_CASE("le component-level oracle") {
    // Single 4x4 gray block; permutation swaps components 0 and 1, reversal
    // mask set on component 2. Everything else identity.
    pe::LeKey k = identity_le_key(4);
    std::swap(k.perm[0], k.perm[1]);
    k.reverse_mask[2] = 1;

    rng::DetRng rng(22);
    img::ImageTensor im = quantized_random(rng, 4, 4);

    // Independent brute force on the explicit component list: component
    // index = c*16 + y*4 + x.
    std::vector<int> comps(48);
    const auto bytes = to_bytes(im);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                comps[c * 16 + y * 4 + x] = bytes[(y * 4 + x) * 3 + c];
    std::vector<int> expect(48);
    for (int i = 0; i < 48; ++i) expect[i] = comps[k.perm[i]];
    expect[2] = 255 - expect[2];

    const img::ImageTensor enc = pe::le_encrypt(im, k);
    const auto enc_bytes = to_bytes(enc);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                CHECK(enc_bytes[(y * 4 + x) * 3 + c] ==
                      expect[c * 16 + y * 4 + x]);

    CHECK(byte_equal(pe::le_decrypt(enc, k), im));
}

TEST_CASE("le determinism and round trips") {
    rng::DetRng rng(23);
    const pe::LeKey k = pe::le_keygen(77, 4);
    for (int t = 0; t < 10; ++t) {
        const img::ImageTensor im = quantized_random(rng, 32, 32);
        const img::ImageTensor e1 = pe::le_encrypt(im, k);
        const img::ImageTensor e2 = pe::le_encrypt(im, k);
        CHECK(byte_equal(e1, e2));
        CHECK(byte_equal(pe::le_decrypt(e1, k), im));
        CHECK(!byte_equal(e1, im));  // key sensitivity vs identity
    }
}

TEST_CASE("le wrong key decryption is far from the plaintext") {
    rng::DetRng rng(24);
    double total = 0.0;
    int n = 0;
    for (int pair = 0; pair < 10; ++pair) {
        const pe::LeKey right = pe::le_keygen(100 + pair, 4);
        const pe::LeKey wrong = pe::le_keygen(200 + pair, 4);
        for (int t = 0; t < 10; ++t) {
            const img::ImageTensor im = quantized_random(rng, 32, 32);
            const img::ImageTensor dec =
                pe::le_decrypt(pe::le_encrypt(im, right), wrong);
            total += test::mean_abs_diff(dec, im);
            ++n;
        }
    }
    CHECK(total / n > 0.05);
}

TEST_CASE("etc_keygen determinism and code domains") {
    const pe::EtcKey a = pe::etc_keygen(7, 4, 4, 8);
    const pe::EtcKey b = pe::etc_keygen(7, 4, 4, 8);
    CHECK(a.block_perm == b.block_perm);
    CHECK(a.rotation == b.rotation);
    CHECK(a.flip == b.flip);
    CHECK(a.negpos == b.negpos);
    CHECK(a.rgb_perm == b.rgb_perm);
    CHECK(a.block_perm.size() == 16);  // (32/8)^2 positions

    std::vector<bool> seen(16, false);
    for (auto p : a.block_perm) {
        REQUIRE(p < 16);
        CHECK(!seen[p]);
        seen[p] = true;
    }
    for (auto r : a.rotation) CHECK(r < 4);
    for (auto f : a.flip) CHECK(f < 3);
    for (auto m : a.negpos) CHECK(m < 8);
    for (auto p : a.rgb_perm) CHECK(p < 6);
}

TEST_CASE("etc identity key is the identity map") {
    rng::DetRng rng(31);
    const img::ImageTensor im = quantized_random(rng, 32, 32);
    const pe::EtcKey k = identity_etc_key(4, 4, 8);
    CHECK(byte_equal(pe::etc_encrypt(im, k), im));
    CHECK(byte_equal(pe::etc_decrypt(im, k), im));
}

TEST_CASE("etc coordinate oracle: rotation + negative-positive") {
    // Single 8x8 block, rotation one quarter turn clockwise, neg-pos on
    // channel 0 only.
    pe::EtcKey k = identity_etc_key(1, 1, 8);
    k.rotation[0] = 1;
    k.negpos[0] = 1;

    rng::DetRng rng(32);
    const img::ImageTensor im = quantized_random(rng, 8, 8);
    const img::ImageTensor enc = pe::etc_encrypt(im, k);

    // Independent coordinate map: cw rotation puts in(7-x, y) at (y, x);
    // channel 0 then reverses value.
    const auto in_b = to_bytes(im);
    const auto out_b = to_bytes(enc);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
            for (int c = 0; c < 3; ++c) {
                int v = in_b[((7 - x) * 8 + y) * 3 + c];
                if (c == 0) v = 255 - v;
                CHECK(out_b[(y * 8 + x) * 3 + c] == v);
            }
    CHECK(byte_equal(pe::etc_decrypt(enc, k), im));
}

TEST_CASE("etc block shuffle moves whole blocks") {
    pe::EtcKey k = identity_etc_key(2, 2, 8);
    std::swap(k.block_perm[0], k.block_perm[3]);

    rng::DetRng rng(33);
    const img::ImageTensor im = quantized_random(rng, 16, 16);
    const img::ImageTensor enc = pe::etc_encrypt(im, k);

    const img::BlockGrid gin = img::to_blocks(im, 8);
    const img::BlockGrid gout = img::to_blocks(enc, 8);
    CHECK(test::max_abs_diff(gout.blocks[0], gin.blocks[3]) == 0.0);
    CHECK(test::max_abs_diff(gout.blocks[3], gin.blocks[0]) == 0.0);
    CHECK(test::max_abs_diff(gout.blocks[1], gin.blocks[1]) == 0.0);
    CHECK(test::max_abs_diff(gout.blocks[2], gin.blocks[2]) == 0.0);
}

TEST_CASE("etc round trips, determinism, wrong key") {
    rng::DetRng rng(34);
    for (int t = 0; t < 10; ++t) {
        const pe::EtcKey k = pe::etc_keygen(500 + t, 4, 4, 8);
        const img::ImageTensor im = quantized_random(rng, 32, 32);
        const img::ImageTensor e1 = pe::etc_encrypt(im, k);
        CHECK(byte_equal(e1, pe::etc_encrypt(im, k)));
        CHECK(byte_equal(pe::etc_decrypt(e1, k), im));
    }
    double total = 0.0;
    int n = 0;
    for (int t = 0; t < 10; ++t) {
        const pe::EtcKey right = pe::etc_keygen(600 + t, 4, 4, 8);
        const pe::EtcKey wrong = pe::etc_keygen(700 + t, 4, 4, 8);
        const img::ImageTensor im = quantized_random(rng, 32, 32);
        total += test::mean_abs_diff(
            pe::etc_decrypt(pe::etc_encrypt(im, right), wrong), im);
        ++n;
    }
    CHECK(total / n > 0.05);
}

TEST_CASE("distinct keys give distinct ciphertexts") {
    rng::DetRng rng(35);
    const img::ImageTensor im = quantized_random(rng, 32, 32);
    for (int t = 0; t < 100; ++t) {
        const pe::LeKey a = pe::le_keygen(1000 + 2 * t, 4);
        const pe::LeKey b = pe::le_keygen(1001 + 2 * t, 4);
        CHECK(!byte_equal(pe::le_encrypt(im, a), pe::le_encrypt(im, b)));
    }
}

TEST_CASE("pe errors") {
    rng::DetRng rng(36);
    const img::ImageTensor im = quantized_random(rng, 30, 30);
    CHECK_THROWS(pe::le_encrypt(im, pe::le_keygen(1, 4)));  // 4 does not divide 30
    CHECK_THROWS(pe::etc_encrypt(im, pe::etc_keygen(1, 4, 4, 8)));  // grid mismatch
    img::ImageTensor gray(32, 32, 1);
    CHECK_THROWS(pe::le_encrypt(gray, pe::le_keygen(1, 4)));
}
