#include <cmath>
#include <fstream>

#include <doctest.h>

#include "pek/metrics.hpp"
#include "pek/synth.hpp"
#include "test_util.hpp"

using namespace pek;
using test::TempDir;

namespace {
models::FeatureExtractor& metric_extractor() {
    static models::FeatureExtractor ex =
        models::make_desk_embedder(123, "tiny_a", 32);
    return ex;
}
}  // namespace

TEST_CASE("cosine similarity basics") {
    rng::DetRng rng(2);
    const img::ImageTensor x = test::random_image(rng, 16, 16);

    SUBCASE("identity") {
        CHECK(metrics::cosine_similarity(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("orthogonal vectors") {
        img::ImageTensor a(2, 2, 1), b(2, 2, 1);
        a.at(0, 0, 0) = 1.0;
        b.at(0, 1, 0) = 1.0;
        CHECK(metrics::cosine_similarity(a, b) == doctest::Approx(0.0));
    }
    SUBCASE("positive scaling keeps collinearity") {
        for (double c : {0.2, 0.5, 0.9}) {
            img::ImageTensor scaled = x;
            for (auto& v : scaled.data) v *= c;
            CHECK(metrics::cosine_similarity(scaled, x) ==
                  doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("symmetry") {
        const img::ImageTensor y = test::random_image(rng, 16, 16);
        CHECK(std::abs(metrics::cosine_similarity(x, y) -
                       metrics::cosine_similarity(y, x)) < 1e-9);
    }
    SUBCASE("errors") {
        img::ImageTensor zero(16, 16, 3);
        CHECK_THROWS(metrics::cosine_similarity(x, zero));
        const img::ImageTensor other = test::random_image(rng, 8, 8);
        CHECK_THROWS(metrics::cosine_similarity(x, other));
    }
}

TEST_CASE("ssim basics") {
    rng::DetRng rng(3);
    const img::ImageTensor x = test::random_image(rng, 20, 20);

    SUBCASE("identity") {
        CHECK(metrics::ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant 0 vs constant 1") {
        img::ImageTensor a(16, 16, 1), b(16, 16, 1);
        for (auto& v : b.data) v = 1.0;
        // mu1=0, mu2=1, all variances 0: ssim = C1 / (1 + C1).
        const double c1 = 0.01 * 0.01;
        CHECK(metrics::ssim(a, b) ==
              doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-9));
    }
    SUBCASE("symmetry") {
        const img::ImageTensor y = test::random_image(rng, 20, 20);
        CHECK(std::abs(metrics::ssim(x, y) - metrics::ssim(y, x)) < 1e-9);
    }
    SUBCASE("errors") {
        const img::ImageTensor small = test::random_image(rng, 8, 8);
        CHECK_THROWS(metrics::ssim(small, small));
        const img::ImageTensor other = test::random_image(rng, 24, 24);
        CHECK_THROWS(metrics::ssim(x, other));
    }
}

namespace {

// Straight-line reimplementation of the perceptual distance, kept
// independent of the production code path: recompute tap activations via
// infer_taps, then apply the formula with plain loops.
double lpips_oracle(const img::ImageTensor& a, const img::ImageTensor& b,
                    const models::FeatureExtractor& ex) {
    const auto fa = ex.net.infer_taps(img::to_tensor(a), ex.tap_layers);
    const auto fb = ex.net.infer_taps(img::to_tensor(b), ex.tap_layers);
    double total = 0.0;
    for (std::size_t l = 0; l < fa.size(); ++l) {
        double acc = 0.0;
        for (int y = 0; y < fa[l].h; ++y)
            for (int x = 0; x < fa[l].w; ++x) {
                double na = 1e-10, nb = 1e-10;
                // Norms accumulated separately, then applied per channel.
                double sa = 0.0, sb = 0.0;
                for (int c = 0; c < fa[l].c; ++c) {
                    sa += fa[l].at(0, c, y, x) * fa[l].at(0, c, y, x);
                    sb += fb[l].at(0, c, y, x) * fb[l].at(0, c, y, x);
                }
                na += std::sqrt(sa);
                nb += std::sqrt(sb);
                for (int c = 0; c < fa[l].c; ++c) {
                    const double d = fa[l].at(0, c, y, x) / na -
                                     fb[l].at(0, c, y, x) / nb;
                    acc += d * d;
                }
            }
        total +=
            acc / (static_cast<double>(fa[l].c) * fa[l].h * fa[l].w);
    }
    return total / static_cast<double>(fa.size());
}

}  // namespace

TEST_CASE("lpips distance") {
    const auto& ex = metric_extractor();
    const auto imgs = img::synth_batch(7, 2, 32, 32);

    SUBCASE("identity is zero") {
        CHECK(metrics::lpips_distance(imgs[0], imgs[0], ex) ==
              doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("matches the straight-line oracle") {
        const double got = metrics::lpips_distance(imgs[0], imgs[1], ex);
        const double want = lpips_oracle(imgs[0], imgs[1], ex);
        CHECK(std::abs(got - want) < 1e-6);
        CHECK(got > 0.0);
    }
    SUBCASE("symmetry") {
        CHECK(std::abs(metrics::lpips_distance(imgs[0], imgs[1], ex) -
                       metrics::lpips_distance(imgs[1], imgs[0], ex)) < 1e-9);
    }
    SUBCASE("nondecreasing in noise amplitude") {
        rng::DetRng rng(10);
        img::ImageTensor noise(32, 32, 3);
        for (auto& v : noise.data) v = rng.uniform() - 0.5;
        double prev = 0.0;
        for (double eps : {0.01, 0.05, 0.1}) {
            img::ImageTensor pert = imgs[0];
            for (std::size_t i = 0; i < pert.data.size(); ++i) {
                double v = pert.data[i] + eps * noise.data[i];
                pert.data[i] = std::min(1.0, std::max(0.0, v));
            }
            const double d = metrics::lpips_distance(imgs[0], pert, ex);
            CHECK(d >= prev);
            prev = d;
        }
    }
}

TEST_CASE("evaluate_pairs and report serialization") {
    const auto& ex = metric_extractor();
    const auto imgs = img::synth_batch(8, 6, 32, 32);

    SUBCASE("identical pair row") {
        metrics::MetricReport rep = metrics::evaluate_pairs(
            {{imgs[0], imgs[0], "s0", "k"}}, ex, "unit");
        REQUIRE(rep.rows.size() == 1);
        CHECK(rep.rows[0].cosine == doctest::Approx(1.0));
        CHECK(rep.rows[0].ssim == doctest::Approx(1.0));
        CHECK(rep.rows[0].lpips == doctest::Approx(0.0));
    }
    SUBCASE("empty list errors") {
        CHECK_THROWS(metrics::evaluate_pairs({}, ex));
    }
    SUBCASE("aggregates are group means and rows sort by id") {
        std::vector<metrics::PairSample> samples;
        for (int i = 0; i < 6; ++i)
            samples.push_back({imgs[i], imgs[(i + 1) % 6],
                               "s" + std::to_string(5 - i),
                               i % 2 ? "a" : "b"});
        metrics::MetricReport rep = metrics::evaluate_pairs(samples, ex);
        REQUIRE(rep.rows.size() == 6);
        for (std::size_t i = 1; i < rep.rows.size(); ++i)
            CHECK(rep.rows[i - 1].sample_id <= rep.rows[i].sample_id);
        for (const auto& [label, agg] : rep.aggregates) {
            double mc = 0, ms = 0, ml = 0;
            int n = 0;
            for (const auto& r : rep.rows)
                if (r.key_label == label) {
                    mc += r.cosine;
                    ms += r.ssim;
                    ml += r.lpips;
                    ++n;
                }
            REQUIRE(n == agg.count);
            CHECK(std::abs(agg.cosine - mc / n) < 1e-9);
            CHECK(std::abs(agg.ssim - ms / n) < 1e-9);
            CHECK(std::abs(agg.lpips - ml / n) < 1e-9);
        }
    }
    SUBCASE("csv round trip with version header") {
        TempDir tmp("metrics_csv");
        metrics::MetricReport rep = metrics::evaluate_pairs(
            {{imgs[0], imgs[1], "s0", "k"}, {imgs[2], imgs[3], "s1", "k"}},
            ex, "unit");
        const std::string p = tmp.file("r.csv");
        rep.write_csv(p);
        rep.write_aggregate_json(tmp.file("r.json"));
        {
            std::ifstream is(p);
            std::string first;
            std::getline(is, first);
            CHECK(first == "# pek-metrics v1");
        }
        metrics::MetricReport back = metrics::MetricReport::read_csv(p);
        REQUIRE(back.rows.size() == rep.rows.size());
        for (std::size_t i = 0; i < back.rows.size(); ++i) {
            CHECK(back.rows[i].sample_id == rep.rows[i].sample_id);
            CHECK(std::abs(back.rows[i].cosine - rep.rows[i].cosine) < 1e-7);
        }
    }
    SUBCASE("metric errors carry the sample id") {
        img::ImageTensor zero(32, 32, 3);
        try {
            metrics::evaluate_pairs({{imgs[0], zero, "bad7", "k"}}, ex);
            FAIL("expected throw");
        } catch (const std::exception& e) {
            CHECK(std::string(e.what()).find("bad7") != std::string::npos);
        }
    }
}
