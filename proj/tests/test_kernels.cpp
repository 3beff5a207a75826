#include <doctest.h>

#include "pek/kernels.hpp"
#include "pek/rng.hpp"

using namespace pek;
using core::Tensor;

namespace {

Tensor random_tensor(rng::DetRng& rng, int n, int c, int h, int w) {
    Tensor t(n, c, h, w);
    for (auto& v : t.v) v = rng.gaussian();
    return t;
}

double max_rel_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double d = std::abs(a.v[i] - b.v[i]);
        const double s = std::max(1.0, std::abs(b.v[i]));
        m = std::max(m, d / s);
    }
    return m;
}

struct ConvCase {
    int n, ic, oc, h, w, k, stride, pad;
};

const ConvCase kCases[] = {
    {2, 3, 5, 9, 9, 3, 1, 1},  {1, 4, 2, 8, 8, 4, 2, 1},
    {3, 2, 3, 7, 11, 3, 1, 0}, {1, 1, 1, 5, 5, 7, 1, 3},
    {2, 5, 4, 12, 12, 4, 2, 1},
};

}  // namespace

TEST_CASE("conv2d parallel kernels match the serial reference") {
    rng::DetRng rng(42);
    for (const auto& tc : kCases) {
        const Tensor in = random_tensor(rng, tc.n, tc.ic, tc.h, tc.w);
        const Tensor w = random_tensor(rng, tc.oc, tc.ic, tc.k, tc.k);
        std::vector<double> bias(tc.oc);
        for (auto& b : bias) b = rng.gaussian();

        Tensor out, out_ref;
        core::conv2d_forward(out, in, w, bias, tc.stride, tc.pad);
        core::ref::conv2d_forward(out_ref, in, w, bias, tc.stride, tc.pad);
        CHECK(max_rel_diff(out, out_ref) < 1e-12);

        const Tensor gout = random_tensor(rng, out.n, out.c, out.h, out.w);
        Tensor gin(in.n, in.c, in.h, in.w), gin_ref(in.n, in.c, in.h, in.w);
        core::conv2d_backward_input(gin, gout, w, tc.stride, tc.pad);
        core::ref::conv2d_backward_input(gin_ref, gout, w, tc.stride, tc.pad);
        CHECK(max_rel_diff(gin, gin_ref) < 1e-12);

        Tensor gw(tc.oc, tc.ic, tc.k, tc.k), gw_ref(tc.oc, tc.ic, tc.k, tc.k);
        std::vector<double> gb, gb_ref;
        core::conv2d_backward_params(gw, gb, gout, in, tc.stride, tc.pad);
        core::ref::conv2d_backward_params(gw_ref, gb_ref, gout, in, tc.stride,
                                          tc.pad);
        CHECK(max_rel_diff(gw, gw_ref) < 1e-12);
        for (int i = 0; i < tc.oc; ++i)
            CHECK(std::abs(gb[i] - gb_ref[i]) /
                      std::max(1.0, std::abs(gb_ref[i])) <
                  1e-12);
    }
}

TEST_CASE("convt2d parallel kernels match the serial reference") {
    rng::DetRng rng(43);
    for (const auto& tc : kCases) {
        const Tensor in = random_tensor(rng, tc.n, tc.ic, tc.h, tc.w);
        const Tensor w = random_tensor(rng, tc.ic, tc.oc, tc.k, tc.k);
        std::vector<double> bias(tc.oc);
        for (auto& b : bias) b = rng.gaussian();
        if ((tc.h - 1) * tc.stride - 2 * tc.pad + tc.k < 1) continue;

        Tensor out, out_ref;
        core::convt2d_forward(out, in, w, bias, tc.stride, tc.pad);
        core::ref::convt2d_forward(out_ref, in, w, bias, tc.stride, tc.pad);
        CHECK(max_rel_diff(out, out_ref) < 1e-12);

        const Tensor gout = random_tensor(rng, out.n, out.c, out.h, out.w);
        Tensor gin(in.n, in.c, in.h, in.w), gin_ref(in.n, in.c, in.h, in.w);
        core::convt2d_backward_input(gin, gout, w, tc.stride, tc.pad);
        core::ref::convt2d_backward_input(gin_ref, gout, w, tc.stride, tc.pad);
        CHECK(max_rel_diff(gin, gin_ref) < 1e-12);

        Tensor gw(tc.ic, tc.oc, tc.k, tc.k), gw_ref(tc.ic, tc.oc, tc.k, tc.k);
        std::vector<double> gb, gb_ref;
        core::convt2d_backward_params(gw, gb, gout, in, tc.stride, tc.pad);
        core::ref::convt2d_backward_params(gw_ref, gb_ref, gout, in, tc.stride,
                                           tc.pad);
        CHECK(max_rel_diff(gw, gw_ref) < 1e-12);
        for (int i = 0; i < tc.oc; ++i)
            CHECK(std::abs(gb[i] - gb_ref[i]) /
                      std::max(1.0, std::abs(gb_ref[i])) <
                  1e-12);
    }
}

TEST_CASE("conv2d backward agrees with finite differences") {
    rng::DetRng rng(7);
    const Tensor in = random_tensor(rng, 1, 2, 5, 5);
    const Tensor w = random_tensor(rng, 3, 2, 3, 3);
    std::vector<double> bias(3, 0.1);

    // Scalar objective: sum of outputs.
    auto value = [&](const Tensor& input, const Tensor& weights) {
        Tensor out;
        core::conv2d_forward(out, input, weights, bias, 1, 1);
        double s = 0.0;
        for (double v : out.v) s += v;
        return s;
    };

    Tensor out;
    core::conv2d_forward(out, in, w, bias, 1, 1);
    Tensor ones(out.n, out.c, out.h, out.w);
    ones.fill(1.0);

    Tensor gin(1, 2, 5, 5);
    core::conv2d_backward_input(gin, ones, w, 1, 1);
    const double h = 1e-6;
    for (std::size_t i = 0; i < gin.v.size(); i += 7) {
        Tensor ip = in, im = in;
        ip.v[i] += h;
        im.v[i] -= h;
        const double fd = (value(ip, w) - value(im, w)) / (2 * h);
        CHECK(std::abs(fd - gin.v[i]) < 1e-6 * std::max(1.0, std::abs(fd)));
    }

    Tensor gw(3, 2, 3, 3);
    std::vector<double> gb;
    core::conv2d_backward_params(gw, gb, ones, in, 1, 1);
    for (std::size_t i = 0; i < gw.v.size(); i += 5) {
        Tensor wp = w, wm = w;
        wp.v[i] += h;
        wm.v[i] -= h;
        const double fd = (value(in, wp) - value(in, wm)) / (2 * h);
        CHECK(std::abs(fd - gw.v[i]) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
}
