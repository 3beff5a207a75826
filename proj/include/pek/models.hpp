#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "pek/image.hpp"
#include "pek/nn.hpp"

namespace pek::models {

// A pluggable embedder: the stand-in for the recognition service model and
// for the perceptual feature branch. Construction fixes the architecture,
// seed and input contract; after that the parameters never change unless a
// caller explicitly unfreezes (no toolkit code does).
class FeatureExtractor {
public:
    FeatureExtractor() = default;

    std::string name;  // "<arch>#<seed>"
    std::string arch;
    std::uint64_t seed = 0;
    int input_h = 0, input_w = 0, input_c = 3;
    int embed_dim = 0;
    std::vector<int> tap_layers;  // indices into net, ascending
    bool frozen = true;

    nn::Sequential net;

    // Deterministic embedding of a single image; thread-safe (infer path).
    std::vector<double> embed(const img::ImageTensor& img) const;
    // Batched embedding as (N, embed_dim, 1, 1).
    core::Tensor embed_tensor(const core::Tensor& batch) const;
    // Tap activations for perceptual distances.
    std::vector<core::Tensor> features(const core::Tensor& batch) const;

    // Training-path forward/backward for gradient flow to the input; the
    // extractor stays frozen (no parameter gradients are accumulated).
    core::Tensor forward_train(const core::Tensor& batch);
    core::Tensor backward_to_input(const core::Tensor& gout);

    std::uint64_t checksum() const { return net.checksum(); }
    void check_input(const core::Tensor& batch) const;

    // Rebuilds the same architecture and copies the parameters; used where a
    // private mutable net is needed for gradient flow.
    FeatureExtractor clone() const;

    void save(const std::string& path) const;
    static FeatureExtractor load(const std::string& path);
};

// Known desk-scale architectures; mirrors a family of small recognition
// embedders with distinct layouts.
std::vector<std::string> desk_embedder_archs();

FeatureExtractor make_desk_embedder(std::uint64_t seed, const std::string& arch,
                                    int input_size = 32);

}  // namespace pek::models
