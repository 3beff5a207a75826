// Master-key attack CLI: train on a surrogate manifest, reconstruct
// directories of ciphertexts, evaluate leakage.
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>

#include "cli_common.hpp"
#include "pek/agan.hpp"

namespace fs = std::filesystem;
using namespace pek;

namespace {
void write_provenance(const std::string& for_path, const nlohmann::json& j) {
    std::ofstream os(for_path + ".provenance.json");
    os << j.dump(2) << '\n';
}
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"master key attack on perceptual encryption"};
    app.require_subcommand(1);

    // train
    std::string tr_manifest, tr_embedder, tr_out;
    gan::TrainConfig tcfg;
    int tr_width = 8, tr_blocks = 4;
    CLI::App* tr = app.add_subcommand("train", "train the master key model");
    tr->add_option("--manifest", tr_manifest, "surrogate manifest")->required();
    tr->add_option("--embedder", tr_embedder, "frozen feature branch checkpoint")
        ->required();
    tr->add_option("--epochs", tcfg.epochs, "training epochs")->required();
    tr->add_option("--out", tr_out, "model checkpoint path")->required();
    tr->add_option("--batch", tcfg.batch_size, "batch size");
    tr->add_option("--lr", tcfg.lr, "learning rate");
    tr->add_option("--alpha", tcfg.alpha, "adversarial coefficient");
    tr->add_option("--beta", tcfg.beta, "reconstruction coefficient");
    tr->add_option("--gamma", tcfg.gamma, "feature coefficient");
    tr->add_option("--seed", tcfg.seed, "init/shuffle seed");
    tr->add_option("--width", tr_width, "generator base width");
    tr->add_option("--blocks", tr_blocks, "residual blocks");
    tr->add_flag("--conditional-d", tcfg.conditional_d,
                 "condition the discriminator on the ciphertext");

    // attack
    std::string at_model, at_in, at_out;
    CLI::App* at = app.add_subcommand("attack", "reconstruct a directory");
    at->add_option("--model", at_model, "model checkpoint")->required();
    at->add_option("--in", at_in, "encrypted image directory")->required();
    at->add_option("--out", at_out, "reconstruction output directory")->required();

    // eval
    std::string ev_model, ev_manifest, ev_report, ev_embedder, ev_name = "eval";
    CLI::App* ev = app.add_subcommand("eval", "evaluate attack vs baseline");
    ev->add_option("--model", ev_model, "model checkpoint")->required();
    ev->add_option("--manifest", ev_manifest, "held-out test manifest")->required();
    ev->add_option("--report", ev_report, "CSV report path")->required();
    ev->add_option("--embedder", ev_embedder, "metric extractor checkpoint")
        ->required();
    ev->add_option("--experiment", ev_name, "experiment tag");

    CLI11_PARSE(app, argc, argv);

    return cli::guarded([&]() -> int {
        if (tr->parsed()) {
            const auto manifest =
                surrogate::SurrogateManifest::load(tr_manifest);
            auto h = models::FeatureExtractor::load(tr_embedder);
            gan::GeneratorSpec gspec;
            gspec.variant = "resnet50_encoder";
            gspec.base_width = tr_width;
            gspec.n_blocks = tr_blocks;
            agan::MasterKeyModel model =
                agan::train_master_key(manifest, h, tcfg, gspec);
            img::ensure_parent_dir(tr_out);
            model.save(tr_out);
            write_provenance(
                tr_out, {{"tool", "agan train"},
                         {"manifest", tr_manifest},
                         {"manifest_hash", model.manifest_hash},
                         {"embedder", h.name},
                         {"embedder_checksum", h.checksum()},
                         {"training_key_labels", model.training_key_labels},
                         {"best_val_l1", model.best_val_l1},
                         {"epochs", tcfg.epochs},
                         {"seed", tcfg.seed}});
            std::printf("master key model trained: best val_l1 %.4f -> %s\n",
                        model.best_val_l1, tr_out.c_str());
            return 0;
        }
        if (at->parsed()) {
            const auto model = agan::MasterKeyModel::load(at_model);
            const auto paths = img::list_image_files(at_in);
            fs::create_directories(at_out);
            for (const auto& p : paths) {
                const img::ImageTensor rec =
                    agan::attack(model, img::load_image(p));
                img::save_image(
                    rec, (fs::path(at_out) / fs::path(p).filename()).string());
            }
            write_provenance((fs::path(at_out) / "attack").string(),
                             {{"tool", "agan attack"},
                              {"model", at_model},
                              {"model_extractor", model.feature_extractor_name},
                              {"inputs", paths.size()}});
            std::printf("reconstructed %zu images -> %s\n", paths.size(),
                        at_out.c_str());
            return 0;
        }
        // eval
        const auto model = agan::MasterKeyModel::load(ev_model);
        const auto manifest = surrogate::SurrogateManifest::load(ev_manifest);
        const auto extractor = models::FeatureExtractor::load(ev_embedder);
        metrics::MetricReport rep =
            agan::evaluate_attack(model, manifest, extractor, ev_name);
        img::ensure_parent_dir(ev_report);
        rep.write_csv(ev_report);
        rep.write_aggregate_json(ev_report + ".aggregate.json");
        write_provenance(ev_report,
                         {{"tool", "agan eval"},
                          {"model", ev_model},
                          {"manifest_hash", manifest.content_hash()},
                          {"model_extractor", model.feature_extractor_name},
                          {"metric_extractor", extractor.name},
                          {"test_keys", manifest.seed_labels()}});
        for (const auto& [label, agg] : rep.aggregates)
            std::printf("%-24s cosine %.3f  ssim %.3f  lpips %.3f  (n=%d)\n",
                        label.c_str(), agg.cosine, agg.ssim, agg.lpips,
                        agg.count);
        return 0;
    });
}
