#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pek/kernels.hpp"
#include "pek/rng.hpp"
#include "pek/tensor.hpp"

// Minimal layer stack with hand-written backward passes. forward()/backward()
// carry per-layer caches and belong to exactly one training loop at a time;
// infer() is const, cache-free and safe to call concurrently on a shared
// frozen model.
namespace pek::nn {

using core::Tensor;

struct Param {
    std::vector<double> w;  // values
    std::vector<double> g;  // accumulated gradient, same size
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& gy) = 0;
    virtual Tensor infer(const Tensor& x) const = 0;
    virtual void init(rng::DetRng&) {}
    virtual void collect_params(std::vector<Param*>&) {}
    virtual std::string kind() const = 0;

    // Frozen layers skip parameter-gradient work in backward; input
    // gradients still flow.
    bool frozen = false;
};

class Conv2d final : public Layer {
public:
    Conv2d(int in_c, int out_c, int k, int stride, int pad);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    void init(rng::DetRng& rng) override;
    void collect_params(std::vector<Param*>& out) override;
    std::string kind() const override { return "conv2d"; }

    int in_c, out_c, k, stride, pad;
    Param weight, bias;

private:
    Tensor last_in_;
};

class ConvTranspose2d final : public Layer {
public:
    ConvTranspose2d(int in_c, int out_c, int k, int stride, int pad);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    void init(rng::DetRng& rng) override;
    void collect_params(std::vector<Param*>& out) override;
    std::string kind() const override { return "convt2d"; }

    int in_c, out_c, k, stride, pad;
    Param weight, bias;

private:
    Tensor last_in_;
};

// Per-sample, per-channel normalization over the spatial extent, affine.
class InstanceNorm final : public Layer {
public:
    explicit InstanceNorm(int channels, double eps = 1e-5);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    void init(rng::DetRng&) override;
    void collect_params(std::vector<Param*>& out) override;
    std::string kind() const override { return "instance_norm"; }

    int channels;
    double eps;
    Param gamma, beta;

private:
    Tensor last_in_;
    std::vector<double> mu_, inv_std_;  // per (n, c)
};

class ReLU final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    std::string kind() const override { return "relu"; }

private:
    Tensor last_in_;
};

class LeakyReLU final : public Layer {
public:
    explicit LeakyReLU(double slope = 0.2) : slope(slope) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    std::string kind() const override { return "leaky_relu"; }
    double slope;

private:
    Tensor last_in_;
};

// y = (tanh(x) + 1) / 2, the bounded [0,1] output head.
class Tanh01 final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    std::string kind() const override { return "tanh01"; }

private:
    Tensor last_out_;
};

class Sigmoid final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    std::string kind() const override { return "sigmoid"; }

private:
    Tensor last_out_;
};

class ReflectPad final : public Layer {
public:
    explicit ReflectPad(int pad) : pad(pad) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    std::string kind() const override { return "reflect_pad"; }
    int pad;

private:
    int in_h_ = 0, in_w_ = 0;
};

class UpsampleNearest2x final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    std::string kind() const override { return "upsample2x"; }
};

// Non-overlapping k x k mean pooling.
class AvgPool2d final : public Layer {
public:
    explicit AvgPool2d(int k) : k(k) {}
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    std::string kind() const override { return "avgpool"; }
    int k;

private:
    int in_h_ = 0, in_w_ = 0;
};

class GlobalAvgPool final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    std::string kind() const override { return "gap"; }

private:
    int in_h_ = 0, in_w_ = 0;
};

// Fully connected over (N, C, 1, 1) tensors.
class Linear final : public Layer {
public:
    Linear(int in_dim, int out_dim);
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    void init(rng::DetRng& rng) override;
    void collect_params(std::vector<Param*>& out) override;
    std::string kind() const override { return "linear"; }

    int in_dim, out_dim;
    Param weight, bias;

private:
    Tensor last_in_;
};

// Per-sample L2 normalization over all elements.
class L2Normalize final : public Layer {
public:
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    std::string kind() const override { return "l2norm"; }

private:
    Tensor last_out_;
    std::vector<double> norms_;
};

class Sequential;

// y = x + body(x). Requires shape-preserving body.
class Residual final : public Layer {
public:
    explicit Residual(std::unique_ptr<Sequential> body);
    ~Residual() override;
    Tensor forward(const Tensor& x) override;
    Tensor backward(const Tensor& gy) override;
    Tensor infer(const Tensor& x) const override;
    void init(rng::DetRng& rng) override;
    void collect_params(std::vector<Param*>& out) override;
    std::string kind() const override { return "residual"; }

    std::unique_ptr<Sequential> body;
};

class Sequential {
public:
    Sequential() = default;
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    template <typename L, typename... Args>
    L* add(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }
    void add_layer(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }

    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& gy);
    Tensor infer(const Tensor& x) const;
    // infer() that also returns the activations after the given layer
    // indices (feature taps for perceptual metrics).
    std::vector<Tensor> infer_taps(const Tensor& x,
                                   const std::vector<int>& taps) const;

    void init(std::uint64_t seed);
    std::vector<Param*> params();
    void zero_grad();
    void set_frozen(bool f);

    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }
    const Layer& layer(std::size_t i) const { return *layers_[i]; }

    std::size_t param_scalar_count() const;
    std::vector<double> snapshot_params() const;
    void restore_params(const std::vector<double>& flat);
    std::uint64_t checksum() const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    mutable std::vector<Param*> param_cache_;
};

// Adam with the (0.5, 0.999) momentum pair used across the toolkit.
struct Adam {
    double lr = 2e-4, beta1 = 0.5, beta2 = 0.999, eps = 1e-8;
    void attach(const std::vector<Param*>& params);
    void step(const std::vector<Param*>& params);

    long t = 0;
    std::vector<std::vector<double>> m, v;
};

}  // namespace pek::nn
