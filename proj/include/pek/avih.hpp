#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pek/gan.hpp"
#include "pek/image.hpp"
#include "pek/models.hpp"

namespace pek::avih {

// A trained reconstruction generator whose init seed is the secret;
// val_l1 records the reconstruction quality reached at training time.
struct SecretGan {
    gan::Generator generator;
    std::string seed_label;
    std::string dataset_tag;
    double val_l1 = 0.0;

    void save(const std::string& path) const;
    static SecretGan load(const std::string& path);
};

struct AvihConfig {
    int steps = 500;
    double step_size = 0.01;
    double lambda_f = 1.0, lambda_g = 1.0, lambda_v = 10.0;
    int variance_grid = 2;  // k blocks per side
    enum class Init { noise, copy };
    Init init = Init::noise;
    std::uint64_t rng_seed = 0;
    int record_every = 10;

    void validate(int h, int w) const;
};

// Trains a generator to reconstruct its input on the given image
// distribution; the last fifth of the (seeded, shuffled) images is held out
// for the recorded validation L1.
SecretGan train_secret_gan(const std::vector<img::ImageTensor>& images,
                           const std::string& seed_label,
                           const gan::TrainConfig& cfg,
                           const gan::GeneratorSpec& gspec,
                           const std::string& dataset_tag = "");

// Mean squared deviation of per-block pixel variance from the block-mean
// variance, over a k x k partition.
double variance_consistency_loss(const img::ImageTensor& image, int k);

// Tensor-domain value and gradient (per batch sample), used by the
// optimizer and by the finite-difference tests.
double variance_consistency_value(const core::Tensor& x, int k,
                                  std::vector<double>* per_sample = nullptr);
core::Tensor variance_consistency_grad(const core::Tensor& x, int k);

struct EncryptTrace {
    // Best-so-far objective at step 0 and every record_every steps.
    std::vector<double> objective;
    double initial_objective = 0.0;
    double final_objective = 0.0;
};

// First-order minimization of
//   lambda_f * MSE(f(x'), f(x)) + lambda_g * L1(G(x'), x) + lambda_v * Lv(x')
// over the ciphertext image, clamped to [0,1] each step; returns the best
// iterate. Batched over images (independent per-image objectives).
std::vector<img::ImageTensor> avih_encrypt_batch(
    const std::vector<img::ImageTensor>& images,
    const models::FeatureExtractor& f, SecretGan& secret,
    const AvihConfig& cfg, std::vector<EncryptTrace>* traces = nullptr);

img::ImageTensor avih_encrypt(const img::ImageTensor& image,
                              const models::FeatureExtractor& f,
                              SecretGan& secret, const AvihConfig& cfg,
                              EncryptTrace* trace = nullptr);

// Authorized recovery: G(x').
img::ImageTensor avih_decrypt(const img::ImageTensor& encrypted,
                              const SecretGan& secret);

}  // namespace pek::avih
