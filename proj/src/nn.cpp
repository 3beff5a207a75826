#include "pek/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace pek::nn {

namespace {
Tensor weight_tensor_view(const Param& p, int n, int c, int k) {
    Tensor t(n, c, k, k);
    t.v = p.w;
    return t;
}
}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_c_, int out_c_, int k_, int stride_, int pad_)
    : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_) {
    weight.w.assign(static_cast<std::size_t>(out_c) * in_c * k * k, 0.0);
    weight.g.assign(weight.w.size(), 0.0);
    bias.w.assign(out_c, 0.0);
    bias.g.assign(out_c, 0.0);
}

void Conv2d::init(rng::DetRng& rng) {
    for (auto& x : weight.w) x = rng.gaussian() * 0.02;
    std::fill(bias.w.begin(), bias.w.end(), 0.0);
}

void Conv2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Tensor Conv2d::infer(const Tensor& x) const {
    if (x.c != in_c) throw std::invalid_argument("conv2d: channel mismatch");
    Tensor w = weight_tensor_view(weight, out_c, in_c, k);
    Tensor out;
    core::conv2d_forward(out, x, w, bias.w, stride, pad);
    return out;
}

Tensor Conv2d::forward(const Tensor& x) {
    last_in_ = x;
    return infer(x);
}

Tensor Conv2d::backward(const Tensor& gy) {
    Tensor w = weight_tensor_view(weight, out_c, in_c, k);
    if (!frozen) {
        Tensor gw(out_c, in_c, k, k);
        std::vector<double> gb;
        core::conv2d_backward_params(gw, gb, gy, last_in_, stride, pad);
        for (std::size_t i = 0; i < weight.g.size(); ++i)
            weight.g[i] += gw.v[i];
        for (int i = 0; i < out_c; ++i) bias.g[i] += gb[i];
    }
    Tensor gin(last_in_.n, last_in_.c, last_in_.h, last_in_.w);
    core::conv2d_backward_input(gin, gy, w, stride, pad);
    return gin;
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_c_, int out_c_, int k_, int stride_,
                                 int pad_)
    : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_) {
    weight.w.assign(static_cast<std::size_t>(in_c) * out_c * k * k, 0.0);
    weight.g.assign(weight.w.size(), 0.0);
    bias.w.assign(out_c, 0.0);
    bias.g.assign(out_c, 0.0);
}

void ConvTranspose2d::init(rng::DetRng& rng) {
    for (auto& x : weight.w) x = rng.gaussian() * 0.02;
    std::fill(bias.w.begin(), bias.w.end(), 0.0);
}

void ConvTranspose2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Tensor ConvTranspose2d::infer(const Tensor& x) const {
    if (x.c != in_c) throw std::invalid_argument("convt2d: channel mismatch");
    Tensor w = weight_tensor_view(weight, in_c, out_c, k);
    Tensor out;
    core::convt2d_forward(out, x, w, bias.w, stride, pad);
    return out;
}

Tensor ConvTranspose2d::forward(const Tensor& x) {
    last_in_ = x;
    return infer(x);
}

Tensor ConvTranspose2d::backward(const Tensor& gy) {
    Tensor w = weight_tensor_view(weight, in_c, out_c, k);
    if (!frozen) {
        Tensor gw(in_c, out_c, k, k);
        std::vector<double> gb;
        core::convt2d_backward_params(gw, gb, gy, last_in_, stride, pad);
        for (std::size_t i = 0; i < weight.g.size(); ++i)
            weight.g[i] += gw.v[i];
        for (int i = 0; i < out_c; ++i) bias.g[i] += gb[i];
    }
    Tensor gin(last_in_.n, last_in_.c, last_in_.h, last_in_.w);
    core::convt2d_backward_input(gin, gy, w, stride, pad);
    return gin;
}

// ----------------------------------------------------------- InstanceNorm

InstanceNorm::InstanceNorm(int channels_, double eps_)
    : channels(channels_), eps(eps_) {
    gamma.w.assign(channels, 1.0);
    gamma.g.assign(channels, 0.0);
    beta.w.assign(channels, 0.0);
    beta.g.assign(channels, 0.0);
}

void InstanceNorm::init(rng::DetRng&) {
    std::fill(gamma.w.begin(), gamma.w.end(), 1.0);
    std::fill(beta.w.begin(), beta.w.end(), 0.0);
}

void InstanceNorm::collect_params(std::vector<Param*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

Tensor InstanceNorm::infer(const Tensor& x) const {
    if (x.c != channels)
        throw std::invalid_argument("instance_norm: channel mismatch");
    Tensor out(x.n, x.c, x.h, x.w);
    const int m = x.h * x.w;
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* p = x.plane(n, c);
            double mu = 0.0;
            for (int i = 0; i < m; ++i) mu += p[i];
            mu /= m;
            double var = 0.0;
            for (int i = 0; i < m; ++i) {
                const double d = p[i] - mu;
                var += d * d;
            }
            var /= m;
            const double inv = 1.0 / std::sqrt(var + eps);
            double* o = out.plane(n, c);
            const double g = gamma.w[c], b = beta.w[c];
            for (int i = 0; i < m; ++i) o[i] = g * (p[i] - mu) * inv + b;
        }
    return out;
}

Tensor InstanceNorm::forward(const Tensor& x) {
    if (x.c != channels)
        throw std::invalid_argument("instance_norm: channel mismatch");
    last_in_ = x;
    mu_.assign(static_cast<std::size_t>(x.n) * x.c, 0.0);
    inv_std_.assign(mu_.size(), 0.0);
    Tensor out(x.n, x.c, x.h, x.w);
    const int m = x.h * x.w;
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* p = x.plane(n, c);
            double mu = 0.0;
            for (int i = 0; i < m; ++i) mu += p[i];
            mu /= m;
            double var = 0.0;
            for (int i = 0; i < m; ++i) {
                const double d = p[i] - mu;
                var += d * d;
            }
            var /= m;
            const double inv = 1.0 / std::sqrt(var + eps);
            mu_[n * x.c + c] = mu;
            inv_std_[n * x.c + c] = inv;
            double* o = out.plane(n, c);
            const double g = gamma.w[c], b = beta.w[c];
            for (int i = 0; i < m; ++i) o[i] = g * (p[i] - mu) * inv + b;
        }
    return out;
}

Tensor InstanceNorm::backward(const Tensor& gy) {
    const Tensor& x = last_in_;
    Tensor gin(x.n, x.c, x.h, x.w);
    const int m = x.h * x.w;
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* p = x.plane(n, c);
            const double* gp = gy.plane(n, c);
            double* gi = gin.plane(n, c);
            const double mu = mu_[n * x.c + c];
            const double inv = inv_std_[n * x.c + c];
            const double g = gamma.w[c];

            double sum_gy = 0.0, sum_gy_xhat = 0.0;
            for (int i = 0; i < m; ++i) {
                const double xhat = (p[i] - mu) * inv;
                sum_gy += gp[i];
                sum_gy_xhat += gp[i] * xhat;
            }
            if (!frozen) {
                gamma.g[c] += sum_gy_xhat;
                beta.g[c] += sum_gy;
            }
            for (int i = 0; i < m; ++i) {
                const double xhat = (p[i] - mu) * inv;
                gi[i] = g * inv *
                        (gp[i] - sum_gy / m - xhat * sum_gy_xhat / m);
            }
        }
    return gin;
}

// ------------------------------------------------------------ activations

Tensor ReLU::infer(const Tensor& x) const {
    Tensor out = x;
    for (auto& v : out.v) v = v > 0 ? v : 0.0;
    return out;
}
Tensor ReLU::forward(const Tensor& x) {
    last_in_ = x;
    return infer(x);
}
Tensor ReLU::backward(const Tensor& gy) {
    Tensor gin = gy;
    for (std::size_t i = 0; i < gin.v.size(); ++i)
        if (last_in_.v[i] <= 0) gin.v[i] = 0.0;
    return gin;
}

Tensor LeakyReLU::infer(const Tensor& x) const {
    Tensor out = x;
    for (auto& v : out.v) v = v > 0 ? v : slope * v;
    return out;
}
Tensor LeakyReLU::forward(const Tensor& x) {
    last_in_ = x;
    return infer(x);
}
Tensor LeakyReLU::backward(const Tensor& gy) {
    Tensor gin = gy;
    for (std::size_t i = 0; i < gin.v.size(); ++i)
        if (last_in_.v[i] <= 0) gin.v[i] *= slope;
    return gin;
}

Tensor Tanh01::infer(const Tensor& x) const {
    Tensor out = x;
    for (auto& v : out.v) v = 0.5 * (std::tanh(v) + 1.0);
    return out;
}
Tensor Tanh01::forward(const Tensor& x) {
    Tensor out = infer(x);
    last_out_ = out;
    return out;
}
Tensor Tanh01::backward(const Tensor& gy) {
    Tensor gin = gy;
    for (std::size_t i = 0; i < gin.v.size(); ++i) {
        const double t = 2.0 * last_out_.v[i] - 1.0;  // tanh(x)
        gin.v[i] *= 0.5 * (1.0 - t * t);
    }
    return gin;
}

Tensor Sigmoid::infer(const Tensor& x) const {
    Tensor out = x;
    for (auto& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}
Tensor Sigmoid::forward(const Tensor& x) {
    Tensor out = infer(x);
    last_out_ = out;
    return out;
}
Tensor Sigmoid::backward(const Tensor& gy) {
    Tensor gin = gy;
    for (std::size_t i = 0; i < gin.v.size(); ++i) {
        const double y = last_out_.v[i];
        gin.v[i] *= y * (1.0 - y);
    }
    return gin;
}

// ------------------------------------------------------------- ReflectPad

namespace {
inline int reflect_index(int i, int n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
    return i;
}
}  // namespace

Tensor ReflectPad::infer(const Tensor& x) const {
    if (pad >= x.h || pad >= x.w)
        throw std::invalid_argument("reflect_pad: pad too large");
    Tensor out(x.n, x.c, x.h + 2 * pad, x.w + 2 * pad);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* ip = x.plane(n, c);
            double* op = out.plane(n, c);
            for (int oy = 0; oy < out.h; ++oy) {
                const int iy = reflect_index(oy - pad, x.h);
                for (int ox = 0; ox < out.w; ++ox) {
                    const int ix = reflect_index(ox - pad, x.w);
                    op[oy * out.w + ox] = ip[iy * x.w + ix];
                }
            }
        }
    return out;
}
Tensor ReflectPad::forward(const Tensor& x) {
    in_h_ = x.h;
    in_w_ = x.w;
    return infer(x);
}
Tensor ReflectPad::backward(const Tensor& gy) {
    Tensor gin(gy.n, gy.c, in_h_, in_w_);
    gin.fill(0.0);
    for (int n = 0; n < gy.n; ++n)
        for (int c = 0; c < gy.c; ++c) {
            const double* gp = gy.plane(n, c);
            double* gi = gin.plane(n, c);
            for (int oy = 0; oy < gy.h; ++oy) {
                const int iy = reflect_index(oy - pad, in_h_);
                for (int ox = 0; ox < gy.w; ++ox) {
                    const int ix = reflect_index(ox - pad, in_w_);
                    gi[iy * in_w_ + ix] += gp[oy * gy.w + ox];
                }
            }
        }
    return gin;
}

// -------------------------------------------------------------- Upsample

Tensor UpsampleNearest2x::infer(const Tensor& x) const {
    Tensor out(x.n, x.c, x.h * 2, x.w * 2);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* ip = x.plane(n, c);
            double* op = out.plane(n, c);
            for (int y = 0; y < out.h; ++y)
                for (int xx = 0; xx < out.w; ++xx)
                    op[y * out.w + xx] = ip[(y / 2) * x.w + (xx / 2)];
        }
    return out;
}
Tensor UpsampleNearest2x::forward(const Tensor& x) { return infer(x); }
Tensor UpsampleNearest2x::backward(const Tensor& gy) {
    Tensor gin(gy.n, gy.c, gy.h / 2, gy.w / 2);
    gin.fill(0.0);
    for (int n = 0; n < gy.n; ++n)
        for (int c = 0; c < gy.c; ++c) {
            const double* gp = gy.plane(n, c);
            double* gi = gin.plane(n, c);
            for (int y = 0; y < gy.h; ++y)
                for (int xx = 0; xx < gy.w; ++xx)
                    gi[(y / 2) * gin.w + (xx / 2)] += gp[y * gy.w + xx];
        }
    return gin;
}

// -------------------------------------------------------------- AvgPool2d

Tensor AvgPool2d::infer(const Tensor& x) const {
    if (x.h % k != 0 || x.w % k != 0)
        throw std::invalid_argument("avgpool: size not divisible");
    Tensor out(x.n, x.c, x.h / k, x.w / k);
    const double inv = 1.0 / (k * k);
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* ip = x.plane(n, c);
            double* op = out.plane(n, c);
            for (int oy = 0; oy < out.h; ++oy)
                for (int ox = 0; ox < out.w; ++ox) {
                    double acc = 0.0;
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx)
                            acc += ip[(oy * k + dy) * x.w + ox * k + dx];
                    op[oy * out.w + ox] = acc * inv;
                }
        }
    return out;
}
Tensor AvgPool2d::forward(const Tensor& x) {
    in_h_ = x.h;
    in_w_ = x.w;
    return infer(x);
}
Tensor AvgPool2d::backward(const Tensor& gy) {
    Tensor gin(gy.n, gy.c, in_h_, in_w_);
    const double inv = 1.0 / (k * k);
    for (int n = 0; n < gy.n; ++n)
        for (int c = 0; c < gy.c; ++c) {
            const double* gp = gy.plane(n, c);
            double* gi = gin.plane(n, c);
            for (int oy = 0; oy < gy.h; ++oy)
                for (int ox = 0; ox < gy.w; ++ox) {
                    const double g = gp[oy * gy.w + ox] * inv;
                    for (int dy = 0; dy < k; ++dy)
                        for (int dx = 0; dx < k; ++dx)
                            gi[(oy * k + dy) * in_w_ + ox * k + dx] = g;
                }
        }
    return gin;
}

// ---------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::infer(const Tensor& x) const {
    Tensor out(x.n, x.c, 1, 1);
    const int m = x.h * x.w;
    for (int n = 0; n < x.n; ++n)
        for (int c = 0; c < x.c; ++c) {
            const double* ip = x.plane(n, c);
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += ip[i];
            out.at(n, c, 0, 0) = acc / m;
        }
    return out;
}
Tensor GlobalAvgPool::forward(const Tensor& x) {
    in_h_ = x.h;
    in_w_ = x.w;
    return infer(x);
}
Tensor GlobalAvgPool::backward(const Tensor& gy) {
    Tensor gin(gy.n, gy.c, in_h_, in_w_);
    const double inv = 1.0 / (in_h_ * in_w_);
    for (int n = 0; n < gy.n; ++n)
        for (int c = 0; c < gy.c; ++c) {
            const double g = gy.at(n, c, 0, 0) * inv;
            double* gi = gin.plane(n, c);
            for (int i = 0; i < in_h_ * in_w_; ++i) gi[i] = g;
        }
    return gin;
}

// ------------------------------------------------------------------ Linear

Linear::Linear(int in_dim_, int out_dim_) : in_dim(in_dim_), out_dim(out_dim_) {
    weight.w.assign(static_cast<std::size_t>(out_dim) * in_dim, 0.0);
    weight.g.assign(weight.w.size(), 0.0);
    bias.w.assign(out_dim, 0.0);
    bias.g.assign(out_dim, 0.0);
}

void Linear::init(rng::DetRng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (auto& x : weight.w) x = rng.gaussian() * s;
    std::fill(bias.w.begin(), bias.w.end(), 0.0);
}

void Linear::collect_params(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Tensor Linear::infer(const Tensor& x) const {
    if (x.c != in_dim || x.h != 1 || x.w != 1)
        throw std::invalid_argument("linear: expects (N, in_dim, 1, 1)");
    Tensor out(x.n, out_dim, 1, 1);
    for (int n = 0; n < x.n; ++n)
        for (int o = 0; o < out_dim; ++o) {
            double acc = bias.w[o];
            const double* wr = weight.w.data() +
                               static_cast<std::size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; ++i) acc += wr[i] * x.at(n, i, 0, 0);
            out.at(n, o, 0, 0) = acc;
        }
    return out;
}
Tensor Linear::forward(const Tensor& x) {
    last_in_ = x;
    return infer(x);
}
Tensor Linear::backward(const Tensor& gy) {
    Tensor gin(last_in_.n, in_dim, 1, 1);
    gin.fill(0.0);
    for (int n = 0; n < gy.n; ++n)
        for (int o = 0; o < out_dim; ++o) {
            const double g = gy.at(n, o, 0, 0);
            double* wg = weight.g.data() + static_cast<std::size_t>(o) * in_dim;
            const double* wr =
                weight.w.data() + static_cast<std::size_t>(o) * in_dim;
            if (!frozen) {
                bias.g[o] += g;
                for (int i = 0; i < in_dim; ++i)
                    wg[i] += g * last_in_.at(n, i, 0, 0);
            }
            for (int i = 0; i < in_dim; ++i)
                gin.at(n, i, 0, 0) += g * wr[i];
        }
    return gin;
}

// -------------------------------------------------------------- L2Normalize

Tensor L2Normalize::infer(const Tensor& x) const {
    Tensor out = x;
    const std::size_t m = x.size() / x.n;
    for (int n = 0; n < x.n; ++n) {
        double* p = out.v.data() + n * m;
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += p[i] * p[i];
        const double norm = std::sqrt(s);
        const double inv = 1.0 / (norm > 1e-12 ? norm : 1e-12);
        for (std::size_t i = 0; i < m; ++i) p[i] *= inv;
    }
    return out;
}
Tensor L2Normalize::forward(const Tensor& x) {
    const std::size_t m = x.size() / x.n;
    norms_.assign(x.n, 0.0);
    for (int n = 0; n < x.n; ++n) {
        const double* p = x.v.data() + n * m;
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += p[i] * p[i];
        const double norm = std::sqrt(s);
        norms_[n] = norm > 1e-12 ? norm : 1e-12;
    }
    Tensor out = x;
    for (int n = 0; n < x.n; ++n) {
        double* p = out.v.data() + n * m;
        const double inv = 1.0 / norms_[n];
        for (std::size_t i = 0; i < m; ++i) p[i] *= inv;
    }
    last_out_ = out;
    return out;
}
Tensor L2Normalize::backward(const Tensor& gy) {
    const std::size_t m = gy.size() / gy.n;
    Tensor gin = gy;
    for (int n = 0; n < gy.n; ++n) {
        const double* y = last_out_.v.data() + n * m;
        const double* g = gy.v.data() + n * m;
        double* o = gin.v.data() + n * m;
        double dot = 0.0;
        for (std::size_t i = 0; i < m; ++i) dot += y[i] * g[i];
        const double inv = 1.0 / norms_[n];
        for (std::size_t i = 0; i < m; ++i) o[i] = (g[i] - y[i] * dot) * inv;
    }
    return gin;
}

// --------------------------------------------------------------- Residual

Residual::Residual(std::unique_ptr<Sequential> body_) : body(std::move(body_)) {}
Residual::~Residual() = default;

Tensor Residual::infer(const Tensor& x) const {
    Tensor y = body->infer(x);
    core::check_same_shape(x, y, "residual");
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += x.v[i];
    return y;
}
Tensor Residual::forward(const Tensor& x) {
    Tensor y = body->forward(x);
    core::check_same_shape(x, y, "residual");
    for (std::size_t i = 0; i < y.v.size(); ++i) y.v[i] += x.v[i];
    return y;
}
Tensor Residual::backward(const Tensor& gy) {
    Tensor gx = body->backward(gy);
    for (std::size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gy.v[i];
    return gx;
}
void Residual::init(rng::DetRng& rng) {
    for (std::size_t i = 0; i < body->layer_count(); ++i)
        body->layer(i).init(rng);
}
void Residual::collect_params(std::vector<Param*>& out) {
    for (std::size_t i = 0; i < body->layer_count(); ++i)
        body->layer(i).collect_params(out);
}

// -------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x) {
    Tensor cur = x;
    for (auto& l : layers_) cur = l->forward(cur);
    return cur;
}

Tensor Sequential::backward(const Tensor& gy) {
    Tensor cur = gy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        cur = (*it)->backward(cur);
    return cur;
}

Tensor Sequential::infer(const Tensor& x) const {
    Tensor cur = x;
    for (const auto& l : layers_) cur = l->infer(cur);
    return cur;
}

std::vector<Tensor> Sequential::infer_taps(const Tensor& x,
                                           const std::vector<int>& taps) const {
    std::vector<Tensor> out;
    out.reserve(taps.size());
    Tensor cur = x;
    std::size_t t = 0;
    for (std::size_t i = 0; i < layers_.size() && t < taps.size(); ++i) {
        cur = layers_[i]->infer(cur);
        if (static_cast<int>(i) == taps[t]) {
            out.push_back(cur);
            ++t;
        }
    }
    if (out.size() != taps.size())
        throw std::invalid_argument("infer_taps: tap index out of range");
    return out;
}

void Sequential::init(std::uint64_t seed) {
    rng::DetRng rng(seed);
    for (auto& l : layers_) l->init(rng);
    param_cache_.clear();
}

std::vector<Param*> Sequential::params() {
    if (param_cache_.empty())
        for (auto& l : layers_) l->collect_params(param_cache_);
    return param_cache_;
}

void Sequential::zero_grad() {
    for (Param* p : params())
        std::fill(p->g.begin(), p->g.end(), 0.0);
}

void Sequential::set_frozen(bool f) {
    for (auto& l : layers_) {
        l->frozen = f;
        if (auto* r = dynamic_cast<Residual*>(l.get())) r->body->set_frozen(f);
    }
}

std::size_t Sequential::param_scalar_count() const {
    std::size_t n = 0;
    for (Param* p : const_cast<Sequential*>(this)->params()) n += p->w.size();
    return n;
}

std::vector<double> Sequential::snapshot_params() const {
    std::vector<double> flat;
    flat.reserve(param_scalar_count());
    for (Param* p : const_cast<Sequential*>(this)->params())
        flat.insert(flat.end(), p->w.begin(), p->w.end());
    return flat;
}

void Sequential::restore_params(const std::vector<double>& flat) {
    std::size_t off = 0;
    for (Param* p : params()) {
        if (off + p->w.size() > flat.size())
            throw std::invalid_argument("restore_params: size mismatch");
        std::copy(flat.begin() + off, flat.begin() + off + p->w.size(),
                  p->w.begin());
        off += p->w.size();
    }
    if (off != flat.size())
        throw std::invalid_argument("restore_params: size mismatch");
}

std::uint64_t Sequential::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (Param* p : const_cast<Sequential*>(this)->params())
        h = rng::fnv1a64(p->w.data(), p->w.size() * sizeof(double), h);
    return h;
}

// -------------------------------------------------------------------- Adam

void Adam::attach(const std::vector<Param*>& params) {
    m.clear();
    v.clear();
    for (Param* p : params) {
        m.emplace_back(p->w.size(), 0.0);
        v.emplace_back(p->w.size(), 0.0);
    }
    t = 0;
}

void Adam::step(const std::vector<Param*>& params) {
    if (m.size() != params.size()) attach(params);
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param* p = params[i];
        for (std::size_t j = 0; j < p->w.size(); ++j) {
            const double g = p->g[j];
            m[i][j] = beta1 * m[i][j] + (1.0 - beta1) * g;
            v[i][j] = beta2 * v[i][j] + (1.0 - beta2) * g * g;
            const double mhat = m[i][j] / bc1;
            const double vhat = v[i][j] / bc2;
            p->w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace pek::nn
