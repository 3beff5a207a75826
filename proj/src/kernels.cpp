#include "pek/kernels.hpp"

#include <stdexcept>

namespace pek::core {

int conv_out_size(int in, int k, int stride, int pad) {
    const int out = (in + 2 * pad - k) / stride + 1;
    if (out < 1) throw std::invalid_argument("conv: output size < 1");
    return out;
}

int convt_out_size(int in, int k, int stride, int pad) {
    const int out = (in - 1) * stride - 2 * pad + k;
    if (out < 1) throw std::invalid_argument("convt: output size < 1");
    return out;
}

namespace {

void check_conv_args(const Tensor& in, const Tensor& w, int stride, int pad) {
    if (stride < 1 || pad < 0)
        throw std::invalid_argument("conv: bad stride/pad");
    if (in.c != w.c) throw std::invalid_argument("conv: channel mismatch");
    if (w.h != w.w) throw std::invalid_argument("conv: non-square kernel");
}

}  // namespace

void conv2d_forward(Tensor& out, const Tensor& in, const Tensor& w,
                    const std::vector<double>& bias, int stride, int pad) {
    check_conv_args(in, w, stride, pad);
    const int k = w.h, oc_n = w.n;
    const int oh = conv_out_size(in.h, k, stride, pad);
    const int ow = conv_out_size(in.w, k, stride, pad);
    out = Tensor(in.n, oc_n, oh, ow);

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < in.n; ++n) {
        for (int oc = 0; oc < oc_n; ++oc) {
            double* op = out.plane(n, oc);
            const double b = bias.empty() ? 0.0 : bias[oc];
            for (int i = 0; i < oh * ow; ++i) op[i] = b;
            for (int ic = 0; ic < in.c; ++ic) {
                const double* ip = in.plane(n, ic);
                const double* wp = w.plane(oc, ic);
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = wp[ky * k + kx];
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= in.h) continue;
                            const double* irow = ip + iy * in.w;
                            double* orow = op + oy * ow;
                            if (stride == 1) {
                                const int x0 = std::max(0, pad - kx);
                                const int x1 =
                                    std::min(ow, in.w + pad - kx);
                                const double* is = irow + x0 + kx - pad;
                                for (int ox = x0; ox < x1; ++ox)
                                    orow[ox] += wv * is[ox - x0];
                            } else {
                                for (int ox = 0; ox < ow; ++ox) {
                                    const int ix = ox * stride + kx - pad;
                                    if (ix < 0 || ix >= in.w) continue;
                                    orow[ox] += wv * irow[ix];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_input(Tensor& gin, const Tensor& gout, const Tensor& w,
                           int stride, int pad) {
    const int k = w.h;
    // gin shape must be preset by the caller (the forward input shape).
    if (gin.n != gout.n || w.n != gout.c || w.c != gin.c)
        throw std::invalid_argument("conv bwd input: shape mismatch");

#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < gin.n; ++n) {
        for (int ic = 0; ic < gin.c; ++ic) {
            double* gp = gin.plane(n, ic);
            for (int i = 0; i < gin.h * gin.w; ++i) gp[i] = 0.0;
            for (int oc = 0; oc < gout.c; ++oc) {
                const double* op = gout.plane(n, oc);
                const double* wp = w.plane(oc, ic);
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = wp[ky * k + kx];
                        for (int oy = 0; oy < gout.h; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= gin.h) continue;
                            const double* orow = op + oy * gout.w;
                            double* grow = gp + iy * gin.w;
                            for (int ox = 0; ox < gout.w; ++ox) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= gin.w) continue;
                                grow[ix] += wv * orow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_params(Tensor& gw, std::vector<double>& gbias,
                            const Tensor& gout, const Tensor& in, int stride,
                            int pad) {
    const int k = gw.h;
    if (gw.n != gout.c || gw.c != in.c)
        throw std::invalid_argument("conv bwd params: shape mismatch");
    gbias.assign(gout.c, 0.0);

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < gout.c; ++oc) {
        double bsum = 0.0;
        for (int n = 0; n < in.n; ++n) {
            const double* op = gout.plane(n, oc);
            for (int i = 0; i < gout.h * gout.w; ++i) bsum += op[i];
        }
        gbias[oc] = bsum;
        for (int ic = 0; ic < in.c; ++ic) {
            double* wp = gw.plane(oc, ic);
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    double acc = 0.0;
                    for (int n = 0; n < in.n; ++n) {
                        const double* op = gout.plane(n, oc);
                        const double* ip = in.plane(n, ic);
                        for (int oy = 0; oy < gout.h; ++oy) {
                            const int iy = oy * stride + ky - pad;
                            if (iy < 0 || iy >= in.h) continue;
                            const double* orow = op + oy * gout.w;
                            const double* irow = ip + iy * in.w;
                            if (stride == 1) {
                                const int x0 = std::max(0, pad - kx);
                                const int x1 =
                                    std::min(gout.w, in.w + pad - kx);
                                const double* is = irow + x0 + kx - pad;
                                for (int ox = x0; ox < x1; ++ox)
                                    acc += orow[ox] * is[ox - x0];
                            } else {
                                for (int ox = 0; ox < gout.w; ++ox) {
                                    const int ix = ox * stride + kx - pad;
                                    if (ix < 0 || ix >= in.w) continue;
                                    acc += orow[ox] * irow[ix];
                                }
                            }
                        }
                    }
                    wp[ky * k + kx] = acc;
                }
            }
        }
    }
}

void convt2d_forward(Tensor& out, const Tensor& in, const Tensor& w,
                     const std::vector<double>& bias, int stride, int pad) {
    if (in.c != w.n) throw std::invalid_argument("convt: channel mismatch");
    const int k = w.h, oc_n = w.c;
    const int oh = convt_out_size(in.h, k, stride, pad);
    const int ow = convt_out_size(in.w, k, stride, pad);
    out = Tensor(in.n, oc_n, oh, ow);

    // Gather form: out[oy,ox] sums in[iy,ix] with oy = iy*s - p + ky.
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < in.n; ++n) {
        for (int oc = 0; oc < oc_n; ++oc) {
            double* op = out.plane(n, oc);
            const double b = bias.empty() ? 0.0 : bias[oc];
            for (int i = 0; i < oh * ow; ++i) op[i] = b;
            for (int ic = 0; ic < in.c; ++ic) {
                const double* ip = in.plane(n, ic);
                const double* wp = w.plane(ic, oc);
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = wp[ky * k + kx];
                        for (int iy = 0; iy < in.h; ++iy) {
                            const int oy = iy * stride - pad + ky;
                            if (oy < 0 || oy >= oh) continue;
                            const double* irow = ip + iy * in.w;
                            double* orow = op + oy * ow;
                            for (int ix = 0; ix < in.w; ++ix) {
                                const int ox = ix * stride - pad + kx;
                                if (ox < 0 || ox >= ow) continue;
                                orow[ox] += wv * irow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

void convt2d_backward_input(Tensor& gin, const Tensor& gout, const Tensor& w,
                            int stride, int pad) {
    const int k = w.h;
    if (gin.n != gout.n || w.n != gin.c || w.c != gout.c)
        throw std::invalid_argument("convt bwd input: shape mismatch");

    // gin[iy,ix] = sum over oc,ky,kx of gout[iy*s-p+ky, ix*s-p+kx] * w.
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < gin.n; ++n) {
        for (int ic = 0; ic < gin.c; ++ic) {
            double* gp = gin.plane(n, ic);
            for (int i = 0; i < gin.h * gin.w; ++i) gp[i] = 0.0;
            for (int oc = 0; oc < gout.c; ++oc) {
                const double* op = gout.plane(n, oc);
                const double* wp = w.plane(ic, oc);
                for (int ky = 0; ky < k; ++ky) {
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = wp[ky * k + kx];
                        for (int iy = 0; iy < gin.h; ++iy) {
                            const int oy = iy * stride - pad + ky;
                            if (oy < 0 || oy >= gout.h) continue;
                            const double* orow = op + oy * gout.w;
                            double* grow = gp + iy * gin.w;
                            for (int ix = 0; ix < gin.w; ++ix) {
                                const int ox = ix * stride - pad + kx;
                                if (ox < 0 || ox >= gout.w) continue;
                                grow[ix] += wv * orow[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

void convt2d_backward_params(Tensor& gw, std::vector<double>& gbias,
                             const Tensor& gout, const Tensor& in, int stride,
                             int pad) {
    const int k = gw.h;
    if (gw.n != in.c || gw.c != gout.c)
        throw std::invalid_argument("convt bwd params: shape mismatch");
    gbias.assign(gout.c, 0.0);

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < gout.c; ++oc) {
        double bsum = 0.0;
        for (int n = 0; n < in.n; ++n) {
            const double* op = gout.plane(n, oc);
            for (int i = 0; i < gout.h * gout.w; ++i) bsum += op[i];
        }
        gbias[oc] = bsum;
        for (int ic = 0; ic < in.c; ++ic) {
            double* wp = gw.plane(ic, oc);
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    double acc = 0.0;
                    for (int n = 0; n < in.n; ++n) {
                        const double* op = gout.plane(n, oc);
                        const double* ip = in.plane(n, ic);
                        for (int iy = 0; iy < in.h; ++iy) {
                            const int oy = iy * stride - pad + ky;
                            if (oy < 0 || oy >= gout.h) continue;
                            const double* orow = op + oy * gout.w;
                            const double* irow = ip + iy * in.w;
                            for (int ix = 0; ix < in.w; ++ix) {
                                const int ox = ix * stride - pad + kx;
                                if (ox < 0 || ox >= gout.w) continue;
                                acc += irow[ix] * orow[ox];
                            }
                        }
                    }
                    wp[ky * k + kx] = acc;
                }
            }
        }
    }
}

}  // namespace pek::core
