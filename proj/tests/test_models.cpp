#include <cmath>

#include <doctest.h>

#include "pek/models.hpp"
#include "pek/synth.hpp"
#include "test_util.hpp"

using namespace pek;
using test::TempDir;

TEST_CASE("desk embedder catalog") {
    const auto archs = models::desk_embedder_archs();
    CHECK(archs.size() >= 3);
    for (const auto& a : archs) {
        const auto ex = models::make_desk_embedder(1, a, 32);
        CHECK(ex.embed_dim == 32);
        CHECK(!ex.tap_layers.empty());
    }
    CHECK_THROWS(models::make_desk_embedder(1, "resnet151", 32));
}

TEST_CASE("embedding determinism, identity cosine and seed separation") {
    const auto ex = models::make_desk_embedder(5, "tiny_a", 32);
    const auto img0 = img::synth_batch(1, 1, 32, 32).front();

    const auto e1 = ex.embed(img0);
    const auto e2 = ex.embed(img0);
    REQUIRE(e1.size() == 32);
    CHECK(e1 == e2);

    double dot = 0, n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < e1.size(); ++i) {
        dot += e1[i] * e2[i];
        n1 += e1[i] * e1[i];
        n2 += e2[i] * e2[i];
    }
    CHECK(dot / std::sqrt(n1 * n2) == doctest::Approx(1.0).epsilon(1e-12));

    const auto ex_b = models::make_desk_embedder(6, "tiny_a", 32);
    CHECK(ex.checksum() != ex_b.checksum());
    const auto ex_c = models::make_desk_embedder(5, "tiny_a", 32);
    CHECK(ex.checksum() == ex_c.checksum());
}

TEST_CASE("embed gradient matches central differences at 8x8") {
    auto ex = models::make_desk_embedder(9, "tiny_a", 8);
    rng::DetRng rng(60);
    const img::ImageTensor im = test::random_image(rng, 8, 8);
    core::Tensor x = img::to_tensor(im);

    // Scalar: weighted sum of the embedding.
    core::Tensor e = ex.forward_train(x);
    core::Tensor mix(e.n, e.c, e.h, e.w);
    rng::DetRng mrng(61);
    for (auto& v : mix.v) v = mrng.gaussian();

    const core::Tensor gin = ex.backward_to_input(mix);

    auto value = [&](const core::Tensor& input) {
        const core::Tensor out = ex.embed_tensor(input);
        double s = 0.0;
        for (std::size_t i = 0; i < out.v.size(); ++i)
            s += out.v[i] * mix.v[i];
        return s;
    };

    const double h = 1e-4;  // central differences, the documented step
    int checked = 0;
    for (std::size_t i = 0; i < x.v.size(); i += 19) {
        core::Tensor xp = x, xm = x;
        xp.v[i] += h;
        xm.v[i] -= h;
        const double fd = (value(xp) - value(xm)) / (2 * h);
        if (std::abs(fd) < 1e-8) continue;  // dead ReLU path
        CHECK(std::abs(fd - gin.v[i]) / std::max(1e-3, std::abs(fd)) < 1e-3);
        ++checked;
    }
    CHECK(checked > 3);
}

TEST_CASE("embeddings shrink smoothly with the perturbation") {
    const auto ex = models::make_desk_embedder(4, "tiny_b", 32);
    const auto base = img::synth_batch(2, 1, 32, 32).front();
    rng::DetRng rng(62);
    img::ImageTensor dir(32, 32, 3);
    for (auto& v : dir.data) v = rng.uniform() - 0.5;

    const auto e0 = ex.embed(base);
    double prev = 1e9;
    for (double eps : {0.1, 0.01, 0.001}) {
        img::ImageTensor pert = base;
        for (std::size_t i = 0; i < pert.data.size(); ++i)
            pert.data[i] =
                std::min(1.0, std::max(0.0, pert.data[i] + eps * dir.data[i]));
        const auto e = ex.embed(pert);
        double d = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i)
            d += (e[i] - e0[i]) * (e[i] - e0[i]);
        d = std::sqrt(d);
        CHECK(d < prev);
        prev = d;
    }
    CHECK(prev < 1e-2);
}

TEST_CASE("extractor checkpoints round trip") {
    TempDir tmp("models_ckpt");
    const auto ex = models::make_desk_embedder(77, "tiny_c", 32);
    const std::string p = tmp.file("h.ckpt");
    ex.save(p);
    const auto back = models::FeatureExtractor::load(p);
    CHECK(back.arch == "tiny_c");
    CHECK(back.checksum() == ex.checksum());
    CHECK(back.name == ex.name);
    const auto im = img::synth_batch(3, 1, 32, 32).front();
    CHECK(back.embed(im) == ex.embed(im));
}

TEST_CASE("embed rejects contract mismatch") {
    const auto ex = models::make_desk_embedder(1, "tiny_a", 32);
    const auto small = img::synth_batch(1, 1, 16, 16).front();
    CHECK_THROWS(ex.embed(small));
}
