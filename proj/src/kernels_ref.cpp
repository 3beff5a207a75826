#include <stdexcept>

#include "pek/kernels.hpp"

namespace pek::core::ref {

void conv2d_forward(Tensor& out, const Tensor& in, const Tensor& w,
                    const std::vector<double>& bias, int stride, int pad) {
    const int k = w.h;
    const int oh = conv_out_size(in.h, k, stride, pad);
    const int ow = conv_out_size(in.w, k, stride, pad);
    out = Tensor(in.n, w.n, oh, ow);
    for (int n = 0; n < in.n; ++n)
        for (int oc = 0; oc < w.n; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = bias.empty() ? 0.0 : bias[oc];
                    for (int ic = 0; ic < in.c; ++ic)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * stride + ky - pad;
                                const int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= in.h || ix < 0 ||
                                    ix >= in.w)
                                    continue;
                                acc += in.at(n, ic, iy, ix) *
                                       w.at(oc, ic, ky, kx);
                            }
                    out.at(n, oc, oy, ox) = acc;
                }
}

void conv2d_backward_input(Tensor& gin, const Tensor& gout, const Tensor& w,
                           int stride, int pad) {
    const int k = w.h;
    gin.fill(0.0);
    for (int n = 0; n < gout.n; ++n)
        for (int oc = 0; oc < gout.c; ++oc)
            for (int oy = 0; oy < gout.h; ++oy)
                for (int ox = 0; ox < gout.w; ++ox) {
                    const double g = gout.at(n, oc, oy, ox);
                    for (int ic = 0; ic < gin.c; ++ic)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * stride + ky - pad;
                                const int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= gin.h || ix < 0 ||
                                    ix >= gin.w)
                                    continue;
                                gin.at(n, ic, iy, ix) +=
                                    g * w.at(oc, ic, ky, kx);
                            }
                }
}

void conv2d_backward_params(Tensor& gw, std::vector<double>& gbias,
                            const Tensor& gout, const Tensor& in, int stride,
                            int pad) {
    const int k = gw.h;
    gw.fill(0.0);
    gbias.assign(gout.c, 0.0);
    for (int n = 0; n < gout.n; ++n)
        for (int oc = 0; oc < gout.c; ++oc)
            for (int oy = 0; oy < gout.h; ++oy)
                for (int ox = 0; ox < gout.w; ++ox) {
                    const double g = gout.at(n, oc, oy, ox);
                    gbias[oc] += g;
                    for (int ic = 0; ic < in.c; ++ic)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int iy = oy * stride + ky - pad;
                                const int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= in.h || ix < 0 ||
                                    ix >= in.w)
                                    continue;
                                gw.at(oc, ic, ky, kx) +=
                                    g * in.at(n, ic, iy, ix);
                            }
                }
}

void convt2d_forward(Tensor& out, const Tensor& in, const Tensor& w,
                     const std::vector<double>& bias, int stride, int pad) {
    const int k = w.h;
    const int oh = convt_out_size(in.h, k, stride, pad);
    const int ow = convt_out_size(in.w, k, stride, pad);
    out = Tensor(in.n, w.c, oh, ow);
    for (int n = 0; n < in.n; ++n)
        for (int oc = 0; oc < w.c; ++oc)
            for (int i = 0; i < oh * ow; ++i)
                out.plane(n, oc)[i] = bias.empty() ? 0.0 : bias[oc];
    // Scatter form, the direct transcription of the definition.
    for (int n = 0; n < in.n; ++n)
        for (int ic = 0; ic < in.c; ++ic)
            for (int iy = 0; iy < in.h; ++iy)
                for (int ix = 0; ix < in.w; ++ix) {
                    const double x = in.at(n, ic, iy, ix);
                    for (int oc = 0; oc < w.c; ++oc)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int oy = iy * stride - pad + ky;
                                const int ox = ix * stride - pad + kx;
                                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow)
                                    continue;
                                out.at(n, oc, oy, ox) +=
                                    x * w.at(ic, oc, ky, kx);
                            }
                }
}

void convt2d_backward_input(Tensor& gin, const Tensor& gout, const Tensor& w,
                            int stride, int pad) {
    const int k = w.h;
    gin.fill(0.0);
    for (int n = 0; n < gin.n; ++n)
        for (int ic = 0; ic < gin.c; ++ic)
            for (int iy = 0; iy < gin.h; ++iy)
                for (int ix = 0; ix < gin.w; ++ix) {
                    double acc = 0.0;
                    for (int oc = 0; oc < gout.c; ++oc)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int oy = iy * stride - pad + ky;
                                const int ox = ix * stride - pad + kx;
                                if (oy < 0 || oy >= gout.h || ox < 0 ||
                                    ox >= gout.w)
                                    continue;
                                acc += gout.at(n, oc, oy, ox) *
                                       w.at(ic, oc, ky, kx);
                            }
                    gin.at(n, ic, iy, ix) = acc;
                }
}

void convt2d_backward_params(Tensor& gw, std::vector<double>& gbias,
                             const Tensor& gout, const Tensor& in, int stride,
                             int pad) {
    const int k = gw.h;
    gw.fill(0.0);
    gbias.assign(gout.c, 0.0);
    for (int n = 0; n < gout.n; ++n)
        for (int oc = 0; oc < gout.c; ++oc)
            for (int oy = 0; oy < gout.h; ++oy)
                for (int ox = 0; ox < gout.w; ++ox)
                    gbias[oc] += gout.at(n, oc, oy, ox);
    for (int n = 0; n < in.n; ++n)
        for (int ic = 0; ic < in.c; ++ic)
            for (int iy = 0; iy < in.h; ++iy)
                for (int ix = 0; ix < in.w; ++ix) {
                    const double x = in.at(n, ic, iy, ix);
                    for (int oc = 0; oc < gout.c; ++oc)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int oy = iy * stride - pad + ky;
                                const int ox = ix * stride - pad + kx;
                                if (oy < 0 || oy >= gout.h || ox < 0 ||
                                    ox >= gout.w)
                                    continue;
                                gw.at(ic, oc, ky, kx) +=
                                    x * gout.at(n, oc, oy, ox);
                            }
                }
}

}  // namespace pek::core::ref
