#pragma once

#include <map>
#include <string>
#include <vector>

#include "pek/image.hpp"
#include "pek/models.hpp"

namespace pek::metrics {

// Cosine similarity over raw flattened pixels. Throws on shape mismatch or a
// zero-norm operand.
double cosine_similarity(const img::ImageTensor& a, const img::ImageTensor& b);

// Mean local SSIM: Gaussian window 11, sigma 1.5, C1=(0.01L)^2, C2=(0.03L)^2
// with L=1, valid-region windows, channel mean.
double ssim(const img::ImageTensor& a, const img::ImageTensor& b);

// Perceptual distance under a frozen extractor: tap activations are
// unit-normalized across channels at each spatial site, squared differences
// averaged per tap layer, then averaged over layers.
double lpips_distance(const img::ImageTensor& a, const img::ImageTensor& b,
                      const models::FeatureExtractor& extractor);

struct MetricRow {
    std::string sample_id;
    std::string key_label;
    double cosine = 0.0, ssim = 0.0, lpips = 0.0;
};

struct Aggregate {
    double cosine = 0.0, ssim = 0.0, lpips = 0.0;
    int count = 0;
    std::map<std::string, double> extras;  // JSON-only auxiliary values
};

struct MetricReport {
    std::string experiment;
    std::string extractor_name;
    std::vector<MetricRow> rows;                 // sorted by sample_id
    std::map<std::string, Aggregate> aggregates;  // by key_label

    void finalize();  // sorts rows, recomputes aggregates
    void write_csv(const std::string& path) const;
    void write_aggregate_json(const std::string& path) const;
    static MetricReport read_csv(const std::string& path);
};

struct PairSample {
    img::ImageTensor original;
    img::ImageTensor candidate;
    std::string sample_id;
    std::string key_label;
};

MetricReport evaluate_pairs(const std::vector<PairSample>& pairs,
                            const models::FeatureExtractor& extractor,
                            const std::string& experiment = "");

}  // namespace pek::metrics
