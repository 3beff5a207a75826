#include <cmath>

#include <doctest.h>

#include "pek/avih.hpp"
#include "pek/metrics.hpp"
#include "pek/synth.hpp"
#include "test_util.hpp"

using namespace pek;
using test::TempDir;

namespace {

gan::GeneratorSpec tiny_gen() {
    gan::GeneratorSpec s;
    s.variant = "resnet9";
    s.base_width = 4;
    s.n_blocks = 1;
    return s;
}

avih::SecretGan quick_secret_gan(const std::string& label, int epochs = 3) {
    const auto images = img::synth_batch(rng::seed_from_label(label) ^ 0xABC,
                                         130, 32, 32);
    gan::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 16;
    cfg.lr = 1e-3;
    cfg.seed = 7;
    return avih::train_secret_gan(images, label, cfg, tiny_gen(), "unit");
}

}  // namespace

TEST_CASE("variance consistency loss values") {
    SUBCASE("constant image is zero") {
        img::ImageTensor im(8, 8, 3);
        for (auto& v : im.data) v = 0.37;
        CHECK(avih::variance_consistency_loss(im, 2) == doctest::Approx(0.0));
    }
    SUBCASE("hand-evaluated block variances 0.25 and 0") {
        // k=2 partition with block variances (0.25, 0, 0.25, 0): mean 0.125,
        // loss = mean of four squared deviations 0.125^2 = 0.015625 -- the
        // same value as the two-block evaluation of the formula.
        img::ImageTensor im(8, 8, 1);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                const bool left = x < 4;
                const bool top = y < 4;
                if (top == left) {
                    // checkerboard: half 0, half 1 -> variance 0.25
                    im.at(y, x, 0) = (y + x) % 2 ? 1.0 : 0.0;
                } else {
                    im.at(y, x, 0) = 0.5;  // constant -> variance 0
                }
            }
        CHECK(avih::variance_consistency_loss(im, 2) ==
              doctest::Approx(0.015625).epsilon(1e-9));
    }
    SUBCASE("zero iff all block variances equal") {
        // Blocks with identical variance but different means.
        img::ImageTensor im(4, 4, 1);
        for (int by = 0; by < 2; ++by)
            for (int bx = 0; bx < 2; ++bx) {
                const double base = 0.2 * (by * 2 + bx);
                im.at(by * 2, bx * 2, 0) = base;
                im.at(by * 2, bx * 2 + 1, 0) = base + 0.2;
                im.at(by * 2 + 1, bx * 2, 0) = base;
                im.at(by * 2 + 1, bx * 2 + 1, 0) = base + 0.2;
            }
        CHECK(avih::variance_consistency_loss(im, 2) ==
              doctest::Approx(0.0).epsilon(1e-15));
        im.at(0, 0, 0) = 0.9;  // perturb one block
        CHECK(avih::variance_consistency_loss(im, 2) > 0.0);
    }
    SUBCASE("non-divisible grid errors") {
        img::ImageTensor im(9, 9, 3);
        CHECK_THROWS(avih::variance_consistency_loss(im, 2));
    }
}

TEST_CASE("variance consistency gradient matches finite differences") {
    rng::DetRng rng(90);
    core::Tensor x(1, 3, 8, 8);
    for (auto& v : x.v) v = rng.uniform();
    const core::Tensor g = avih::variance_consistency_grad(x, 2);
    const double h = 1e-6;
    for (std::size_t i = 0; i < x.v.size(); i += 11) {
        core::Tensor xp = x, xm = x;
        xp.v[i] += h;
        xm.v[i] -= h;
        const double fd = (avih::variance_consistency_value(xp, 2) -
                           avih::variance_consistency_value(xm, 2)) /
                          (2 * h);
        CHECK(std::abs(fd - g.v[i]) <= 1e-3 * std::max(1e-6, std::abs(fd)));
    }
}

TEST_CASE("secret gan training reconstructs and records validation l1") {
    avih::SecretGan s = quick_secret_gan("0.02", 4);
    CHECK(std::isfinite(s.val_l1));
    CHECK(s.seed_label == "0.02");

    // Reconstruction beats noise on in-distribution images.
    const auto im = img::synth_batch(555, 1, 32, 32).front();
    const img::ImageTensor rec = avih::avih_decrypt(im, s);
    rng::DetRng rng(91);
    const img::ImageTensor noise = test::random_image(rng, 32, 32);
    CHECK(metrics::ssim(rec, im) > metrics::ssim(noise, im));

    // Distinct seeds give distinct parameters.
    avih::SecretGan s2 = quick_secret_gan("0.05", 4);
    CHECK(s.generator.checksum() != s2.generator.checksum());

    // Too few images is a precondition violation.
    const auto few = img::synth_batch(1, 50, 32, 32);
    gan::TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS(avih::train_secret_gan(few, "x", cfg, tiny_gen()));
}

TEST_CASE("secret gan checkpoints round trip") {
    TempDir tmp("avih_ckpt");
    avih::SecretGan s = quick_secret_gan("0.07", 2);
    const std::string p = tmp.file("secret.ckpt");
    s.save(p);
    avih::SecretGan back = avih::SecretGan::load(p);
    CHECK(back.seed_label == "0.07");
    CHECK(back.val_l1 == doctest::Approx(s.val_l1));
    CHECK(back.generator.checksum() == s.generator.checksum());
}

TEST_CASE("avih encryption mechanics") {
    avih::SecretGan s = quick_secret_gan("0.03", 3);
    auto f = models::make_desk_embedder(40, "tiny_a", 32);
    const auto images = img::synth_batch(777, 2, 32, 32);

    avih::AvihConfig cfg;
    cfg.steps = 60;
    cfg.record_every = 10;
    cfg.rng_seed = 5;

    SUBCASE("best-iterate trajectory is non-increasing, end <= start") {
        std::vector<avih::EncryptTrace> traces;
        const auto enc =
            avih::avih_encrypt_batch(images, f, s, cfg, &traces);
        REQUIRE(enc.size() == 2);
        for (const auto& t : traces) {
            REQUIRE(t.objective.size() >= 2);
            for (std::size_t i = 1; i < t.objective.size(); ++i)
                CHECK(t.objective[i] <= t.objective[i - 1] + 1e-12);
            CHECK(t.final_objective <= t.initial_objective + 1e-12);
        }
        for (const auto& e : enc) img::validate(e, "avih ciphertext");
    }
    SUBCASE("g-term only drives the reconstruction loss down") {
        avih::AvihConfig gonly = cfg;
        gonly.lambda_f = 0.0;
        gonly.lambda_v = 0.0;
        avih::EncryptTrace trace;
        const img::ImageTensor enc =
            avih::avih_encrypt(images[0], f, s, gonly, &trace);
        // Objective is exactly lambda_g * l1(G(x'), x): floor-seeking.
        CHECK(trace.final_objective < trace.initial_objective);
        for (std::size_t i = 1; i < trace.objective.size(); ++i)
            CHECK(trace.objective[i] <= trace.objective[i - 1] + 1e-12);
    }
    SUBCASE("encryptions depend on the secret seed") {
        avih::SecretGan s2 = quick_secret_gan("0.09", 3);
        const img::ImageTensor e1 = avih::avih_encrypt(images[0], f, s, cfg);
        const img::ImageTensor e2 = avih::avih_encrypt(images[0], f, s2, cfg);
        CHECK(test::mean_abs_diff(e1, e2) > 0.05);
    }
    SUBCASE("decrypt returns the generator output with the right shape") {
        const img::ImageTensor enc = avih::avih_encrypt(images[0], f, s, cfg);
        const img::ImageTensor dec = avih::avih_decrypt(enc, s);
        CHECK(dec.height == enc.height);
        CHECK(dec.width == enc.width);
        CHECK(dec.channels == 3);
        CHECK(metrics::ssim(dec, images[0]) > metrics::ssim(enc, images[0]));
    }
    SUBCASE("bad configs are rejected") {
        avih::AvihConfig bad = cfg;
        bad.variance_grid = 5;  // does not divide 32
        CHECK_THROWS(avih::avih_encrypt(images[0], f, s, bad));
        bad = cfg;
        bad.steps = 0;
        CHECK_THROWS(avih::avih_encrypt(images[0], f, s, bad));
    }
}
