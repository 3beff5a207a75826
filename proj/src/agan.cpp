#include "pek/agan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "pek/checkpoint.hpp"
#include "pek/rng.hpp"

namespace pek::agan {

namespace {

struct LoadedPair {
    img::ImageTensor orig;
    img::ImageTensor enc;
    std::string seed_label;
    std::string pair_id;
};

std::vector<LoadedPair> load_split(const surrogate::SurrogateManifest& m,
                                   const std::string& split) {
    std::vector<LoadedPair> out;
    for (const auto* r : m.split_records(split)) {
        LoadedPair p;
        p.orig = img::load_image(r->orig_path);
        p.enc = img::load_image(r->enc_path);
        p.seed_label = r->seed_label;
        p.pair_id = r->pair_id;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

MasterKeyModel train_master_key(const surrogate::SurrogateManifest& manifest,
                                models::FeatureExtractor& h,
                                const gan::TrainConfig& cfg,
                                const gan::GeneratorSpec& gspec_in) {
    cfg.validate();
    const auto labels = manifest.seed_labels();
    if (labels.size() < 2)
        throw std::invalid_argument(
            "train_master_key: needs >= 2 distinct seed labels");

    std::vector<LoadedPair> train = load_split(manifest, "train");
    std::vector<LoadedPair> val = load_split(manifest, "val");
    if (train.empty() || val.empty())
        throw std::invalid_argument("train_master_key: empty split");

    const std::uint64_t h_before = h.checksum();

    gan::GeneratorSpec gspec = gspec_in;
    gspec.variant = "resnet50_encoder";
    gspec.height = train.front().orig.height;
    gspec.width = train.front().orig.width;

    MasterKeyModel model;
    model.generator = gan::build_generator(gspec, cfg.seed);
    gan::DiscriminatorSpec dspec;
    dspec.base_width = std::max(8, gspec.base_width);
    dspec.in_channels = cfg.conditional_d ? 6 : 3;
    model.discriminator =
        gan::build_discriminator(dspec, cfg.seed ^ 0x9e3779b97f4a7c15ull);
    model.cfg = cfg;
    model.feature_extractor_name = h.name;
    model.training_key_labels = labels;
    model.manifest_hash = manifest.content_hash();

    gan::TrainState state;
    state.opt_g.lr = cfg.lr;
    state.opt_d.lr = cfg.lr;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_params = model.generator.net.snapshot_params();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng::DetRng erng(cfg.seed + 0xa5a5u + epoch);
        erng.shuffle(order);
        EpochRecord rec;
        rec.epoch = epoch;
        int batches = 0;
        for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const std::size_t end =
                std::min(order.size(), off + cfg.batch_size);
            std::vector<img::ImageTensor> target, input;
            target.reserve(end - off);
            input.reserve(end - off);
            for (std::size_t i = off; i < end; ++i) {
                target.push_back(train[order[i]].orig);
                input.push_back(train[order[i]].enc);
            }
            const gan::LossRecord lr = gan::gan_train_step(
                model.generator, model.discriminator, &h,
                img::to_tensor(target), img::to_tensor(input), cfg, state);
            rec.adv += lr.adv;
            rec.l1 += lr.l1;
            rec.feature += lr.feature;
            rec.total += lr.total;
            ++batches;
        }
        rec.adv /= batches;
        rec.l1 /= batches;
        rec.feature /= batches;
        rec.total /= batches;

        double val_l1 = 0.0;
        for (const auto& p : val)
            val_l1 += gan::l1_loss(
                img::to_tensor(p.orig),
                model.generator.infer(img::to_tensor(p.enc)));
        val_l1 /= static_cast<double>(val.size());
        rec.val_l1 = val_l1;
        model.history.push_back(rec);

        if (!std::isfinite(val_l1))
            throw std::runtime_error("train_master_key: diverged");
        if (val_l1 < best_val) {
            best_val = val_l1;
            best_params = model.generator.net.snapshot_params();
        }
    }

    model.generator.net.restore_params(best_params);
    model.best_val_l1 = best_val;
    model.epochs_completed = cfg.epochs;
    model.feature_extractor_checksum = h.checksum();
    if (model.feature_extractor_checksum != h_before)
        throw std::runtime_error(
            "train_master_key: frozen extractor was mutated");
    return model;
}

img::ImageTensor attack(const MasterKeyModel& model,
                        const img::ImageTensor& encrypted) {
    const core::Tensor y =
        model.generator.infer(img::to_tensor(encrypted));
    return img::from_tensor(y);
}

namespace {

void check_key_hygiene(const MasterKeyModel& model,
                       const surrogate::SurrogateManifest& test) {
    const std::set<std::string> trained(model.training_key_labels.begin(),
                                        model.training_key_labels.end());
    for (const auto& label : test.seed_labels())
        if (trained.count(label))
            throw std::runtime_error(
                "evaluate_attack: test key '" + label +
                "' appears in training provenance (key leak)");
}

double embed_cosine(const models::FeatureExtractor& ex,
                    const img::ImageTensor& a, const img::ImageTensor& b) {
    const auto ea = ex.embed(a);
    const auto eb = ex.embed(b);
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < ea.size(); ++i) {
        dot += ea[i] * eb[i];
        na += ea[i] * ea[i];
        nb += eb[i] * eb[i];
    }
    return dot / (std::sqrt(na) * std::sqrt(nb) + 1e-30);
}

}  // namespace

metrics::MetricReport evaluate_attack(const MasterKeyModel& model,
                                      const surrogate::SurrogateManifest& test,
                                      const models::FeatureExtractor& extractor,
                                      const std::string& experiment) {
    check_key_hygiene(model, test);
    std::vector<metrics::PairSample> samples;
    for (const auto& r : test.records) {
        const img::ImageTensor orig = img::load_image(r.orig_path);
        const img::ImageTensor enc = img::load_image(r.enc_path);
        const img::ImageTensor rec = attack(model, enc);
        samples.push_back({orig, enc, r.pair_id + "/baseline",
                           r.seed_label + "/baseline"});
        samples.push_back(
            {orig, rec, r.pair_id + "/attack", r.seed_label + "/attack"});
    }
    metrics::MetricReport rep =
        metrics::evaluate_pairs(samples, extractor, experiment);

    // Mark the attack-minus-baseline delta per key.
    for (const auto& label : test.seed_labels()) {
        auto atk = rep.aggregates.find(label + "/attack");
        auto base = rep.aggregates.find(label + "/baseline");
        if (atk != rep.aggregates.end() && base != rep.aggregates.end()) {
            atk->second.extras["delta_cosine"] =
                atk->second.cosine - base->second.cosine;
            atk->second.extras["delta_ssim"] =
                atk->second.ssim - base->second.ssim;
            atk->second.extras["delta_lpips"] =
                atk->second.lpips - base->second.lpips;
        }
    }
    return rep;
}

metrics::MetricReport transferability_eval(
    const MasterKeyModel& model, const surrogate::SurrogateManifest& test,
    const models::FeatureExtractor& metric_extractor,
    const std::vector<std::string>& target_embedder_names,
    const models::FeatureExtractor* embed_cosine_extractor) {
    metrics::MetricReport rep = evaluate_attack(
        model, test, metric_extractor, "transferability");

    std::string names = model.feature_extractor_name;
    for (const auto& n : target_embedder_names) names += "," + n;
    rep.experiment = "transferability[" + names + "]";

    if (embed_cosine_extractor) {
        // Embedding-space cosine alongside the pixel cosine.
        std::map<std::string, std::pair<double, int>> acc;
        for (const auto& r : test.records) {
            const img::ImageTensor orig = img::load_image(r.orig_path);
            const img::ImageTensor enc = img::load_image(r.enc_path);
            const img::ImageTensor rec = attack(model, enc);
            auto& a = acc[r.seed_label + "/attack"];
            a.first += embed_cosine(*embed_cosine_extractor, orig, rec);
            a.second += 1;
            auto& b = acc[r.seed_label + "/baseline"];
            b.first += embed_cosine(*embed_cosine_extractor, orig, enc);
            b.second += 1;
        }
        for (auto& [label, pr] : acc) {
            auto it = rep.aggregates.find(label);
            if (it != rep.aggregates.end())
                it->second.extras["embed_cosine"] = pr.first / pr.second;
        }
    }
    return rep;
}

void MasterKeyModel::save(const std::string& path) const {
    ckpt::Blob blob;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& r : history)
        hist.push_back({{"epoch", r.epoch},
                        {"adv", r.adv},
                        {"l1", r.l1},
                        {"feature", r.feature},
                        {"total", r.total},
                        {"val_l1", r.val_l1}});
    blob.descriptor = {
        {"kind", "master_key_model"},
        {"version", 1},
        {"generator",
         {{"variant", generator.spec.variant},
          {"height", generator.spec.height},
          {"width", generator.spec.width},
          {"base_width", generator.spec.base_width},
          {"n_blocks", generator.spec.n_blocks},
          {"seed_label", generator.spec.seed_label}}},
        {"discriminator",
         {{"variant", discriminator.spec.variant},
          {"conv_layers", discriminator.spec.conv_layers},
          {"base_width", discriminator.spec.base_width},
          {"in_channels", discriminator.spec.in_channels}}},
        {"feature_extractor",
         {{"name", feature_extractor_name},
          {"checksum", feature_extractor_checksum}}},
        {"coefficients",
         {{"alpha", cfg.alpha},
          {"beta", cfg.beta},
          {"gamma", cfg.gamma},
          {"lr", cfg.lr},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed},
          {"conditional_d", cfg.conditional_d}}},
        {"training_key_labels", training_key_labels},
        {"manifest_hash", manifest_hash},
        {"epochs_completed", epochs_completed},
        {"best_val_l1", best_val_l1},
        {"history", hist},
    };
    blob.arrays.push_back(generator.net.snapshot_params());
    blob.arrays.push_back(discriminator.net.snapshot_params());
    ckpt::save_blob(path, blob);
}

MasterKeyModel MasterKeyModel::load(const std::string& path) {
    ckpt::Blob blob = ckpt::load_blob(path);
    const auto& d = blob.descriptor;
    if (d.at("kind") != "master_key_model")
        throw std::runtime_error("not a master key checkpoint: " + path);

    MasterKeyModel m;
    const auto& gj = d.at("generator");
    gan::GeneratorSpec gspec;
    gspec.variant = gj.at("variant").get<std::string>();
    gspec.height = gj.at("height").get<int>();
    gspec.width = gj.at("width").get<int>();
    gspec.base_width = gj.at("base_width").get<int>();
    gspec.n_blocks = gj.at("n_blocks").get<int>();
    gspec.seed_label = gj.at("seed_label").get<std::string>();

    const auto& cj = d.at("coefficients");
    m.cfg.alpha = cj.at("alpha").get<double>();
    m.cfg.beta = cj.at("beta").get<double>();
    m.cfg.gamma = cj.at("gamma").get<double>();
    m.cfg.lr = cj.at("lr").get<double>();
    m.cfg.batch_size = cj.at("batch_size").get<int>();
    m.cfg.epochs = cj.at("epochs").get<int>();
    m.cfg.seed = cj.at("seed").get<std::uint64_t>();
    m.cfg.conditional_d = cj.at("conditional_d").get<bool>();

    m.generator = gan::build_generator(gspec, m.cfg.seed);
    m.generator.net.restore_params(blob.arrays.at(0));

    const auto& dj = d.at("discriminator");
    gan::DiscriminatorSpec dspec;
    dspec.variant = dj.at("variant").get<std::string>();
    dspec.conv_layers = dj.at("conv_layers").get<int>();
    dspec.base_width = dj.at("base_width").get<int>();
    dspec.in_channels = dj.at("in_channels").get<int>();
    m.discriminator =
        gan::build_discriminator(dspec, m.cfg.seed ^ 0x9e3779b97f4a7c15ull);
    m.discriminator.net.restore_params(blob.arrays.at(1));

    m.feature_extractor_name =
        d.at("feature_extractor").at("name").get<std::string>();
    m.feature_extractor_checksum =
        d.at("feature_extractor").at("checksum").get<std::uint64_t>();
    m.training_key_labels =
        d.at("training_key_labels").get<std::vector<std::string>>();
    m.manifest_hash = d.at("manifest_hash").get<std::uint64_t>();
    m.epochs_completed = d.at("epochs_completed").get<int>();
    m.best_val_l1 = d.at("best_val_l1").get<double>();
    for (const auto& rj : d.at("history")) {
        EpochRecord r;
        r.epoch = rj.at("epoch").get<int>();
        r.adv = rj.at("adv").get<double>();
        r.l1 = rj.at("l1").get<double>();
        r.feature = rj.at("feature").get<double>();
        r.total = rj.at("total").get<double>();
        r.val_l1 = rj.at("val_l1").get<double>();
        m.history.push_back(r);
    }
    return m;
}

img::ImageTensor AutoencoderBaseline::reconstruct(
    const img::ImageTensor& encrypted) const {
    return img::from_tensor(net.infer(img::to_tensor(encrypted)));
}

AutoencoderBaseline train_autoencoder_baseline(
    const std::vector<std::pair<img::ImageTensor, img::ImageTensor>>& pairs,
    const std::string& key_label, int epochs, int batch_size, double lr,
    std::uint64_t seed, int base_width) {
    if (pairs.empty())
        throw std::invalid_argument("autoencoder: no training pairs");

    AutoencoderBaseline ae;
    ae.key_label = key_label;
    ae.base_width = base_width;
    const int w = base_width;
    ae.net.add<nn::Conv2d>(3, w, 4, 2, 1);
    ae.net.add<nn::ReLU>();
    ae.net.add<nn::Conv2d>(w, 2 * w, 4, 2, 1);
    ae.net.add<nn::ReLU>();
    ae.net.add<nn::Conv2d>(2 * w, 4 * w, 4, 2, 1);
    ae.net.add<nn::ReLU>();
    ae.net.add<nn::ConvTranspose2d>(4 * w, 2 * w, 4, 2, 1);
    ae.net.add<nn::ReLU>();
    ae.net.add<nn::ConvTranspose2d>(2 * w, w, 4, 2, 1);
    ae.net.add<nn::ReLU>();
    ae.net.add<nn::ConvTranspose2d>(w, 3, 4, 2, 1);
    ae.net.add<nn::Tanh01>();
    ae.net.init(seed);

    nn::Adam opt;
    opt.lr = lr;
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        rng::DetRng erng(seed + 17 + epoch);
        erng.shuffle(order);
        for (std::size_t off = 0; off < order.size(); off += batch_size) {
            const std::size_t end = std::min(order.size(), off + batch_size);
            std::vector<img::ImageTensor> target, input;
            for (std::size_t i = off; i < end; ++i) {
                target.push_back(pairs[order[i]].first);
                input.push_back(pairs[order[i]].second);
            }
            const core::Tensor t = img::to_tensor(target);
            const core::Tensor in = img::to_tensor(input);
            const core::Tensor y = ae.net.forward(in);
            // Mean squared reconstruction error.
            core::Tensor g = y;
            double loss = 0.0;
            const double inv = 2.0 / static_cast<double>(y.size());
            for (std::size_t i = 0; i < y.v.size(); ++i) {
                const double diff = y.v[i] - t.v[i];
                loss += diff * diff;
                g.v[i] = inv * diff;
            }
            loss /= static_cast<double>(y.size());
            if (!std::isfinite(loss))
                throw std::runtime_error("autoencoder: diverged");
            ae.net.zero_grad();
            ae.net.backward(g);
            opt.step(ae.net.params());
        }
    }
    return ae;
}

}  // namespace pek::agan
