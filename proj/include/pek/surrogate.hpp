#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pek/avih.hpp"
#include "pek/image.hpp"
#include "pek/models.hpp"

namespace pek::surrogate {

struct PairRecord {
    std::string pair_id;
    std::string orig_path;
    std::string enc_path;
    std::string seed_label;
    std::string dataset_tag;
    std::string split;  // "train" | "val" | "" before assembly
};

// The dataset S: pair files on disk plus this index. The ssim of each pair,
// measured from the saved files at generation time, is kept in a sidecar so
// later runs can verify the files are still the ground truth.
struct SurrogateManifest {
    std::vector<PairRecord> records;
    std::map<std::string, double> gen_ssim;  // by pair_id
    std::uint64_t shuffle_seed = 0;

    std::vector<std::string> seed_labels() const;
    std::map<std::string, int> per_seed_counts() const;
    std::vector<const PairRecord*> split_records(const std::string& split) const;

    void save(const std::string& path) const;  // TSV + .gen.json sidecar
    static SurrogateManifest load(const std::string& path);
    std::uint64_t content_hash() const;
    // Checks file existence, loadability and the cached generation ssim.
    void verify_files(double tol = 1e-6) const;
};

// Runs the AVIH encryptor with one data GAN acting as the secret model and
// writes n (original, encrypted) pairs under out_dir. Divergent samples are
// skipped and logged, up to max_skips.
std::vector<PairRecord> generate_pairs(avih::SecretGan& gan,
                                       const models::FeatureExtractor& f,
                                       const std::vector<img::ImageTensor>& images,
                                       int n, const avih::AvihConfig& cfg,
                                       const std::string& out_dir,
                                       const std::string& dataset_tag,
                                       int max_skips = 10,
                                       int batch_size = 32);

// Pools record lists, shuffles deterministically and splits per seed label:
// train = clamp(floor(n * fraction), 1, n-1) for n >= 2.
SurrogateManifest assemble_dataset(
    const std::vector<std::vector<PairRecord>>& parts, double train_fraction,
    std::uint64_t shuffle_seed);

enum class Scheme { le, etc };

// Traditional-PE surrogate data. LE: a fixed key per label, n images each.
// EtC: a fresh per-image key derived from "<label>:<index>".
SurrogateManifest generate_traditional_pairs(
    Scheme scheme, const std::vector<std::string>& key_labels,
    const std::vector<img::ImageTensor>& images, int n_per_key, int block_size,
    const std::string& out_dir, const std::string& dataset_tag,
    double train_fraction = 0.8, std::uint64_t shuffle_seed = 1);

}  // namespace pek::surrogate
