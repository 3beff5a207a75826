#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pek/gan.hpp"
#include "pek/metrics.hpp"
#include "pek/surrogate.hpp"

namespace pek::agan {

struct EpochRecord {
    int epoch = 0;
    double adv = 0.0, l1 = 0.0, feature = 0.0, total = 0.0;
    double val_l1 = 0.0;
};

// The attacker generator plus everything needed to audit how it was made.
struct MasterKeyModel {
    gan::Generator generator;  // resnet50_encoder variant
    gan::Discriminator discriminator;
    std::string feature_extractor_name;
    std::uint64_t feature_extractor_checksum = 0;
    gan::TrainConfig cfg;
    std::vector<std::string> training_key_labels;
    std::uint64_t manifest_hash = 0;
    int epochs_completed = 0;
    double best_val_l1 = 0.0;
    std::vector<EpochRecord> history;

    void save(const std::string& path) const;
    static MasterKeyModel load(const std::string& path);
};

// Trains the master key model on the manifest's train split; keeps the
// parameters of the best validation-L1 epoch. h stays frozen throughout
// (enforced by checksum).
MasterKeyModel train_master_key(const surrogate::SurrogateManifest& manifest,
                                models::FeatureExtractor& h,
                                const gan::TrainConfig& cfg,
                                const gan::GeneratorSpec& gspec);

// x~ = G_a(x'), deterministic.
img::ImageTensor attack(const MasterKeyModel& model,
                        const img::ImageTensor& encrypted);

// Per-key aggregates for the ciphertext baseline (x' vs x, key label
// "<key>/baseline") and the attack (x~ vs x, "<key>/attack"). Refuses any
// test key present in the training provenance.
metrics::MetricReport evaluate_attack(const MasterKeyModel& model,
                                      const surrogate::SurrogateManifest& test,
                                      const models::FeatureExtractor& extractor,
                                      const std::string& experiment = "");

// Same report against ciphertexts generated for other embedders; adds
// embedding-space cosine per group and names every embedder involved.
metrics::MetricReport transferability_eval(
    const MasterKeyModel& model, const surrogate::SurrogateManifest& test,
    const models::FeatureExtractor& metric_extractor,
    const std::vector<std::string>& target_embedder_names,
    const models::FeatureExtractor* embed_cosine_extractor = nullptr);

// Three conv layers down, three transposed-conv layers up; trained with
// plain reconstruction MSE on pairs from a single key.
struct AutoencoderBaseline {
    nn::Sequential net;
    std::string key_label;
    int base_width = 8;

    img::ImageTensor reconstruct(const img::ImageTensor& encrypted) const;
};

AutoencoderBaseline train_autoencoder_baseline(
    const std::vector<std::pair<img::ImageTensor, img::ImageTensor>>& pairs,
    const std::string& key_label, int epochs, int batch_size, double lr,
    std::uint64_t seed, int base_width = 8);

}  // namespace pek::agan
