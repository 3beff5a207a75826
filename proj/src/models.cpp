#include "pek/models.hpp"

#include <stdexcept>

#include "pek/checkpoint.hpp"

namespace pek::models {

void FeatureExtractor::check_input(const core::Tensor& batch) const {
    if (batch.c != input_c || batch.h != input_h || batch.w != input_w)
        throw std::invalid_argument(
            "embed: input does not match extractor contract " + name);
}

std::vector<double> FeatureExtractor::embed(const img::ImageTensor& image) const {
    core::Tensor t = img::to_tensor(image);
    check_input(t);
    core::Tensor e = net.infer(t);
    return e.v;
}

core::Tensor FeatureExtractor::embed_tensor(const core::Tensor& batch) const {
    check_input(batch);
    return net.infer(batch);
}

std::vector<core::Tensor> FeatureExtractor::features(
    const core::Tensor& batch) const {
    check_input(batch);
    return net.infer_taps(batch, tap_layers);
}

core::Tensor FeatureExtractor::forward_train(const core::Tensor& batch) {
    check_input(batch);
    return net.forward(batch);
}

core::Tensor FeatureExtractor::backward_to_input(const core::Tensor& gout) {
    return net.backward(gout);
}

FeatureExtractor FeatureExtractor::clone() const {
    FeatureExtractor c = make_desk_embedder(seed, arch, input_h);
    c.net.restore_params(net.snapshot_params());
    return c;
}

std::vector<std::string> desk_embedder_archs() {
    return {"tiny_a", "tiny_b", "tiny_c"};
}

FeatureExtractor make_desk_embedder(std::uint64_t seed, const std::string& arch,
                                    int input_size) {
    FeatureExtractor ex;
    ex.arch = arch;
    ex.seed = seed;
    ex.input_h = ex.input_w = input_size;
    ex.input_c = 3;
    ex.embed_dim = 32;
    ex.name = arch + "#" + std::to_string(seed);

    nn::Sequential& net = ex.net;
    if (arch == "tiny_a") {
        net.add<nn::Conv2d>(3, 8, 3, 2, 1);
        net.add<nn::ReLU>();  // tap
        net.add<nn::Conv2d>(8, 16, 3, 2, 1);
        net.add<nn::ReLU>();  // tap
        net.add<nn::Conv2d>(16, 16, 3, 1, 1);
        net.add<nn::ReLU>();  // tap
        net.add<nn::GlobalAvgPool>();
        net.add<nn::Linear>(16, ex.embed_dim);
        net.add<nn::L2Normalize>();
        ex.tap_layers = {1, 3, 5};
    } else if (arch == "tiny_b") {
        net.add<nn::Conv2d>(3, 12, 5, 2, 2);
        net.add<nn::LeakyReLU>(0.2);  // tap
        net.add<nn::Conv2d>(12, 24, 3, 2, 1);
        net.add<nn::LeakyReLU>(0.2);  // tap
        net.add<nn::GlobalAvgPool>();
        net.add<nn::Linear>(24, ex.embed_dim);
        net.add<nn::L2Normalize>();
        ex.tap_layers = {1, 3};
    } else if (arch == "tiny_c") {
        net.add<nn::Conv2d>(3, 8, 3, 1, 1);
        net.add<nn::ReLU>();  // tap
        net.add<nn::AvgPool2d>(2);
        net.add<nn::Conv2d>(8, 16, 3, 1, 1);
        net.add<nn::ReLU>();  // tap
        net.add<nn::AvgPool2d>(2);
        net.add<nn::Conv2d>(16, 32, 3, 1, 1);
        net.add<nn::ReLU>();  // tap
        net.add<nn::GlobalAvgPool>();
        net.add<nn::Linear>(32, ex.embed_dim);
        net.add<nn::L2Normalize>();
        ex.tap_layers = {1, 4, 7};
    } else {
        throw std::invalid_argument("make_desk_embedder: unknown arch " + arch);
    }
    net.init(seed);
    net.set_frozen(true);
    ex.frozen = true;
    return ex;
}

void FeatureExtractor::save(const std::string& path) const {
    ckpt::Blob blob;
    blob.descriptor = {
        {"kind", "feature_extractor"},
        {"version", 1},
        {"arch", arch},
        {"seed", seed},
        {"name", name},
        {"input", {{"h", input_h}, {"w", input_w}, {"c", input_c}}},
        {"embed_dim", embed_dim},
        {"checksum", checksum()},
    };
    blob.arrays.push_back(net.snapshot_params());
    ckpt::save_blob(path, blob);
}

FeatureExtractor FeatureExtractor::load(const std::string& path) {
    ckpt::Blob blob = ckpt::load_blob(path);
    const auto& d = blob.descriptor;
    if (d.at("kind") != "feature_extractor")
        throw std::runtime_error("not an extractor checkpoint: " + path);
    FeatureExtractor ex = make_desk_embedder(
        d.at("seed").get<std::uint64_t>(), d.at("arch").get<std::string>(),
        d.at("input").at("h").get<int>());
    ex.net.restore_params(blob.arrays.at(0));
    if (d.contains("checksum") &&
        d.at("checksum").get<std::uint64_t>() != ex.checksum())
        throw std::runtime_error("extractor checksum mismatch: " + path);
    return ex;
}

}  // namespace pek::models
