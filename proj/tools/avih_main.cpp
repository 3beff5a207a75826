// AVIH-style target CLI: train secret reconstruction models and produce
// optimization-based ciphertexts.
#include <filesystem>

#include <CLI11.hpp>

#include "cli_common.hpp"
#include "pek/avih.hpp"
#include "pek/metrics.hpp"
#include "pek/surrogate.hpp"

namespace fs = std::filesystem;
using namespace pek;

int main(int argc, char** argv) {
    CLI::App app{"optimization-based perceptual encryption target"};
    app.require_subcommand(1);

    // train-gan
    std::string tg_images, tg_label, tg_out, tg_tag = "local";
    int tg_width = 8, tg_blocks = 4, tg_epochs = 10, tg_batch = 16;
    double tg_lr = 2e-4;
    std::uint64_t tg_seed = 0;
    CLI::App* tg = app.add_subcommand(
        "train-gan", "train a seed-labeled secret reconstruction model");
    tg->add_option("--images", tg_images, "training image directory")->required();
    tg->add_option("--seed-label", tg_label, "opaque secret seed label")->required();
    tg->add_option("--out", tg_out, "checkpoint path")->required();
    tg->add_option("--width", tg_width, "generator base width");
    tg->add_option("--blocks", tg_blocks, "residual blocks");
    tg->add_option("--epochs", tg_epochs, "training epochs");
    tg->add_option("--batch", tg_batch, "batch size");
    tg->add_option("--lr", tg_lr, "learning rate");
    tg->add_option("--seed", tg_seed, "shuffle seed");
    tg->add_option("--tag", tg_tag, "dataset tag");

    // encrypt
    std::string en_gan, en_emb, en_in, en_out, en_manifest;
    avih::AvihConfig acfg;
    CLI::App* en = app.add_subcommand("encrypt", "encrypt a directory");
    en->add_option("--secret-gan", en_gan, "secret model checkpoint")->required();
    en->add_option("--embedder", en_emb, "service embedder checkpoint")->required();
    en->add_option("--in", en_in, "input image directory")->required();
    en->add_option("--out", en_out, "output image directory")->required();
    en->add_option("--manifest", en_manifest, "manifest path to write");
    en->add_option("--steps", acfg.steps, "optimization steps");
    en->add_option("--step-size", acfg.step_size, "optimizer step size");
    en->add_option("--lambda-f", acfg.lambda_f, "feature term weight");
    en->add_option("--lambda-g", acfg.lambda_g, "reconstruction term weight");
    en->add_option("--lambda-v", acfg.lambda_v, "variance term weight");
    en->add_option("--k", acfg.variance_grid, "variance grid (blocks per side)");
    en->add_option("--seed", acfg.rng_seed, "ciphertext init seed");

    // decrypt (authorized recovery)
    std::string de_gan, de_in, de_out;
    CLI::App* de = app.add_subcommand("decrypt", "authorized recovery G(x')");
    de->add_option("--secret-gan", de_gan, "secret model checkpoint")->required();
    de->add_option("--in", de_in, "encrypted image directory")->required();
    de->add_option("--out", de_out, "output image directory")->required();

    CLI11_PARSE(app, argc, argv);

    return cli::guarded([&]() -> int {
        if (tg->parsed()) {
            const auto images = cli::load_dir(tg_images);
            gan::TrainConfig cfg;
            cfg.epochs = tg_epochs;
            cfg.batch_size = tg_batch;
            cfg.lr = tg_lr;
            cfg.seed = tg_seed;
            gan::GeneratorSpec gspec;
            gspec.variant = "resnet9";
            gspec.base_width = tg_width;
            gspec.n_blocks = tg_blocks;
            avih::SecretGan s =
                avih::train_secret_gan(images, tg_label, cfg, gspec, tg_tag);
            img::ensure_parent_dir(tg_out);
            s.save(tg_out);
            std::printf("secret gan '%s' trained: val_l1 %.4f -> %s\n",
                        tg_label.c_str(), s.val_l1, tg_out.c_str());
            return 0;
        }
        if (en->parsed()) {
            avih::SecretGan s = avih::SecretGan::load(en_gan);
            const auto f = models::FeatureExtractor::load(en_emb);
            const auto paths = img::list_image_files(en_in);
            std::vector<img::ImageTensor> images;
            for (const auto& p : paths) images.push_back(img::load_image(p));
            const auto enc = avih::avih_encrypt_batch(images, f, s, acfg);
            fs::create_directories(en_out);
            surrogate::SurrogateManifest m;
            for (std::size_t i = 0; i < enc.size(); ++i) {
                const std::string stem = fs::path(paths[i]).stem().string();
                const std::string out_path =
                    (fs::path(en_out) / (stem + ".png")).string();
                img::save_image(enc[i], out_path);
                surrogate::PairRecord r;
                r.pair_id = s.seed_label + "-" + std::to_string(i);
                r.orig_path = paths[i];
                r.enc_path = out_path;
                r.seed_label = s.seed_label;
                r.dataset_tag = "avih";
                m.records.push_back(std::move(r));
            }
            for (const auto& rec : m.records) {
                const img::ImageTensor o = img::load_image(rec.orig_path);
                const img::ImageTensor e = img::load_image(rec.enc_path);
                m.gen_ssim[rec.pair_id] = metrics::ssim(e, o);
            }
            if (!en_manifest.empty()) {
                img::ensure_parent_dir(en_manifest);
                m.save(en_manifest);
            }
            std::printf("encrypted %zu images under seed label '%s'\n",
                        enc.size(), s.seed_label.c_str());
            return 0;
        }
        // decrypt
        avih::SecretGan s = avih::SecretGan::load(de_gan);
        const auto paths = img::list_image_files(de_in);
        fs::create_directories(de_out);
        for (const auto& p : paths) {
            const img::ImageTensor rec =
                avih::avih_decrypt(img::load_image(p), s);
            img::save_image(rec,
                            (fs::path(de_out) / fs::path(p).filename()).string());
        }
        std::printf("recovered %zu images\n", paths.size());
        return 0;
    });
}
