#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pek/models.hpp"
#include "pek/nn.hpp"

namespace pek::gan {

using core::Tensor;

// Architecture descriptor plus parameters; the seed label records key
// provenance for secret models.
struct GeneratorSpec {
    std::string variant = "resnet9";  // or "resnet50_encoder"
    int height = 32, width = 32;
    int base_width = 64;
    int n_blocks = 9;
    std::string seed_label;
};

struct Generator {
    GeneratorSpec spec;
    nn::Sequential net;

    Tensor forward(const Tensor& x) { return net.forward(x); }
    Tensor infer(const Tensor& x) const { return net.infer(x); }
    std::uint64_t checksum() const { return net.checksum(); }
};

struct DiscriminatorSpec {
    std::string variant = "patchgan";
    int conv_layers = 3;
    int base_width = 64;
    int in_channels = 3;
};

struct Discriminator {
    DiscriminatorSpec spec;
    nn::Sequential net;

    Tensor forward(const Tensor& x) { return net.forward(x); }
    Tensor infer(const Tensor& x) const { return net.infer(x); }
};

struct TrainConfig {
    double alpha = 1.0;   // adversarial coefficient
    double beta = 100.0;  // reconstruction (L1) coefficient
    double gamma = 1.0;   // feature coefficient
    double lr = 2e-4;
    int epochs = 220;
    int batch_size = 32;
    std::uint64_t seed = 0;
    bool conditional_d = false;  // concat the encrypted input into D

    void validate() const;
};

Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed);
Discriminator build_discriminator(const DiscriminatorSpec& spec,
                                  std::uint64_t seed);

// Adversarial value log D(real) + log(1 - D(fake)), means over batch and
// patch map, logs clamped at 1e-12.
double adv_loss(Discriminator& d, const Tensor& real, const Tensor& fake);
double l1_loss(const Tensor& target, const Tensor& output);
Tensor l1_loss_grad(const Tensor& target, const Tensor& output);

// (1/n) sum_i (e1_i - e2_i)^2, averaged over the batch.
double feature_mse(const Tensor& e1, const Tensor& e2);
double feature_loss(models::FeatureExtractor& h, const Tensor& target,
                    const Tensor& output);
double total_loss(double alpha, double beta, double gamma, double l_adv,
                  double l_g, double l_h);

struct LossRecord {
    double adv = 0.0, l1 = 0.0, feature = 0.0, total = 0.0;
};

struct TrainState {
    nn::Adam opt_g;
    nn::Adam opt_d;
};

// One simultaneous step: the generator descends the total loss, the
// discriminator ascends the adversarial value; both gradients are evaluated
// at the pre-update parameters. h (optional when gamma is 0) stays frozen.
LossRecord gan_train_step(Generator& g, Discriminator& d,
                          models::FeatureExtractor* h, const Tensor& target,
                          const Tensor& input, const TrainConfig& cfg,
                          TrainState& state);

// Checkpoint I/O for (generator, optional discriminator) bundles.
void save_generator(const std::string& path, const Generator& g,
                    std::uint64_t init_seed, int epoch,
                    const TrainConfig& cfg,
                    const nlohmann::json& extra = {});
Generator load_generator(const std::string& path,
                         nlohmann::json* descriptor_out = nullptr);

}  // namespace pek::gan
