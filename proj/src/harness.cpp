#include "pek/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>

#include "pek/agan.hpp"
#include "pek/avih.hpp"
#include "pek/gan.hpp"
#include "pek/pe.hpp"
#include "pek/rng.hpp"
#include "pek/surrogate.hpp"
#include "pek/synth.hpp"

namespace fs = std::filesystem;

namespace pek::harness {

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return from_json(j);
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const char* key : {"experiment", "output_root", "stages"})
        if (!j.contains(key))
            throw ConfigError(std::string("config missing '") + key + "'");
    if (!j.at("stages").is_array())
        throw ConfigError("config 'stages' must be an array");
    std::set<std::string> names;
    for (const auto& s : j.at("stages")) {
        if (!s.contains("name") || !s.contains("type"))
            throw ConfigError("every stage needs 'name' and 'type'");
        if (!names.insert(s.at("name").get<std::string>()).second)
            throw ConfigError("duplicate stage name " +
                              s.at("name").get<std::string>());
    }
    ExperimentConfig cfg;
    cfg.doc = j;
    return cfg;
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write config: " + path);
    os << doc.dump(2) << '\n';
}

std::string ExperimentConfig::experiment() const {
    return doc.at("experiment").get<std::string>();
}

std::string ExperimentConfig::output_root() const {
    if (const char* env = std::getenv("PEK_OUTPUT_ROOT"); env && *env)
        return env;
    return doc.at("output_root").get<std::string>();
}

std::uint64_t ExperimentConfig::seed() const {
    return doc.value("seed", 0ull);
}

const nlohmann::json& ExperimentConfig::stages() const {
    return doc.at("stages");
}

namespace {

struct StageContext {
    fs::path root;
    std::uint64_t global_seed = 0;

    std::string resolve(const std::string& p) const {
        fs::path fp(p);
        if (fp.is_absolute()) return fp.string();
        return (root / fp).string();
    }
};

std::vector<img::ImageTensor> load_images(const std::string& dir, int limit = 0) {
    std::vector<img::ImageTensor> out;
    auto paths = img::list_image_files(dir);
    if (limit > 0 && static_cast<int>(paths.size()) > limit)
        paths.resize(limit);
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(img::load_image(p));
    return out;
}

gan::TrainConfig train_config_from(const nlohmann::json& j,
                                   std::uint64_t default_seed) {
    gan::TrainConfig cfg;
    cfg.alpha = j.value("alpha", 1.0);
    cfg.beta = j.value("beta", 100.0);
    cfg.gamma = j.value("gamma", 1.0);
    cfg.lr = j.value("lr", 2e-4);
    cfg.epochs = j.value("epochs", 220);
    cfg.batch_size = j.value("batch", 32);
    cfg.seed = j.value("seed", default_seed);
    cfg.conditional_d = j.value("conditional_d", false);
    return cfg;
}

avih::AvihConfig avih_config_from(const nlohmann::json& j,
                                  std::uint64_t default_seed) {
    avih::AvihConfig cfg;
    cfg.steps = j.value("steps", 500);
    cfg.step_size = j.value("step_size", 0.01);
    cfg.lambda_f = j.value("lambda_f", 1.0);
    cfg.lambda_g = j.value("lambda_g", 1.0);
    cfg.lambda_v = j.value("lambda_v", 10.0);
    cfg.variance_grid = j.value("k", 2);
    cfg.rng_seed = j.value("rng_seed", default_seed);
    cfg.init = j.value("init", std::string("noise")) == "copy"
                   ? avih::AvihConfig::Init::copy
                   : avih::AvihConfig::Init::noise;
    return cfg;
}

void write_provenance(const std::string& for_path, const nlohmann::json& j) {
    std::ofstream os(for_path + ".provenance.json");
    os << j.dump(2) << '\n';
}

// ------------------------------------------------------------- stage impls
// Each returns the list of produced artifact paths.

std::vector<std::string> stage_synth(const StageContext& ctx,
                                     const nlohmann::json& j) {
    const int count = j.at("count").get<int>();
    const int size = j.value("size", 32);
    const std::string dir = ctx.resolve(j.at("dir").get<std::string>());
    fs::create_directories(dir);
    const auto images =
        img::synth_batch(j.value("seed", ctx.global_seed), count, size, size);
    std::vector<std::string> outputs;
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%05d.png", i);
        const std::string p = (fs::path(dir) / name).string();
        img::save_image(images[i], p);
        outputs.push_back(p);
    }
    return outputs;
}

std::vector<std::string> stage_embedder(const StageContext& ctx,
                                        const nlohmann::json& j) {
    const auto ex = models::make_desk_embedder(
        j.value("seed", ctx.global_seed), j.at("arch").get<std::string>(),
        j.value("size", 32));
    const std::string out = ctx.resolve(j.at("out").get<std::string>());
    img::ensure_parent_dir(out);
    ex.save(out);
    return {out};
}

std::vector<std::string> stage_secret_gan(const StageContext& ctx,
                                          const nlohmann::json& j) {
    const auto images =
        load_images(ctx.resolve(j.at("images").get<std::string>()),
                    j.value("limit", 0));
    gan::TrainConfig cfg = train_config_from(j, ctx.global_seed);
    gan::GeneratorSpec gspec;
    gspec.variant = "resnet9";
    gspec.base_width = j.value("width", 8);
    gspec.n_blocks = j.value("blocks", 4);
    avih::SecretGan s = avih::train_secret_gan(
        images, j.at("seed_label").get<std::string>(), cfg, gspec,
        j.value("tag", std::string("synth")));
    const std::string out = ctx.resolve(j.at("out").get<std::string>());
    img::ensure_parent_dir(out);
    s.save(out);
    return {out};
}

std::vector<std::string> stage_pe_pairs(const StageContext& ctx,
                                        const nlohmann::json& j) {
    const std::string scheme_s = j.at("scheme").get<std::string>();
    if (scheme_s != "le" && scheme_s != "etc")
        throw std::runtime_error("unknown scheme " + scheme_s);
    const auto scheme = scheme_s == "le" ? surrogate::Scheme::le
                                         : surrogate::Scheme::etc;
    const auto images =
        load_images(ctx.resolve(j.at("images").get<std::string>()),
                    j.value("limit", 0));
    const auto labels = j.at("key_labels").get<std::vector<std::string>>();
    const std::string out_dir = ctx.resolve(j.at("out_dir").get<std::string>());
    const std::string manifest =
        ctx.resolve(j.at("manifest").get<std::string>());
    surrogate::SurrogateManifest m = surrogate::generate_traditional_pairs(
        scheme, labels, images, j.at("per_key").get<int>(),
        j.value("block_size", scheme == surrogate::Scheme::le ? 4 : 8),
        out_dir, j.value("tag", scheme_s),
        j.value("split", 0.8), j.value("shuffle_seed", ctx.global_seed + 1));
    img::ensure_parent_dir(manifest);
    m.save(manifest);
    return {manifest};
}

std::vector<std::string> stage_avih_pairs(const StageContext& ctx,
                                          const nlohmann::json& j) {
    const auto images =
        load_images(ctx.resolve(j.at("images").get<std::string>()),
                    j.value("limit", 0));
    const auto f = models::FeatureExtractor::load(
        ctx.resolve(j.at("embedder").get<std::string>()));
    const avih::AvihConfig acfg = avih_config_from(j, ctx.global_seed);
    const int per_gan = j.at("per_gan").get<int>();
    const std::string out_dir = ctx.resolve(j.at("out_dir").get<std::string>());
    const std::string tag = j.value("tag", std::string("avih"));

    std::vector<std::vector<surrogate::PairRecord>> parts;
    std::size_t offset = 0;
    for (const auto& gp : j.at("secret_gans")) {
        avih::SecretGan s =
            avih::SecretGan::load(ctx.resolve(gp.get<std::string>()));
        if (offset + per_gan > images.size())
            throw std::runtime_error("avih-pairs: not enough source images");
        const std::vector<img::ImageTensor> slice(
            images.begin() + offset, images.begin() + offset + per_gan);
        offset += per_gan;
        parts.push_back(surrogate::generate_pairs(
            s, f, slice, per_gan, acfg, out_dir, tag,
            j.value("max_skips", 10), j.value("enc_batch", 32)));
    }
    surrogate::SurrogateManifest m = surrogate::assemble_dataset(
        parts, j.value("split", 0.75),
        j.value("shuffle_seed", ctx.global_seed + 2));
    const std::string manifest =
        ctx.resolve(j.at("manifest").get<std::string>());
    img::ensure_parent_dir(manifest);
    m.save(manifest);
    return {manifest};
}

std::vector<std::string> stage_agan_train(const StageContext& ctx,
                                          const nlohmann::json& j) {
    const auto manifest = surrogate::SurrogateManifest::load(
        ctx.resolve(j.at("manifest").get<std::string>()));
    auto h = models::FeatureExtractor::load(
        ctx.resolve(j.at("embedder").get<std::string>()));
    gan::TrainConfig cfg = train_config_from(j, ctx.global_seed);
    gan::GeneratorSpec gspec;
    gspec.variant = "resnet50_encoder";
    gspec.base_width = j.value("width", 8);
    gspec.n_blocks = j.value("blocks", 4);
    agan::MasterKeyModel model =
        agan::train_master_key(manifest, h, cfg, gspec);
    const std::string out = ctx.resolve(j.at("out").get<std::string>());
    img::ensure_parent_dir(out);
    model.save(out);
    write_provenance(out, {{"tool", "agan-train"},
                           {"manifest_hash", model.manifest_hash},
                           {"embedder", h.name},
                           {"embedder_checksum", h.checksum()},
                           {"training_key_labels", model.training_key_labels},
                           {"best_val_l1", model.best_val_l1},
                           {"epochs", cfg.epochs},
                           {"seed", cfg.seed}});
    return {out};
}

std::vector<std::string> stage_agan_eval(const StageContext& ctx,
                                         const nlohmann::json& j) {
    const auto model = agan::MasterKeyModel::load(
        ctx.resolve(j.at("model").get<std::string>()));
    const auto manifest = surrogate::SurrogateManifest::load(
        ctx.resolve(j.at("manifest").get<std::string>()));
    const auto extractor = models::FeatureExtractor::load(
        ctx.resolve(j.at("embedder").get<std::string>()));
    const std::string report =
        ctx.resolve(j.at("report").get<std::string>());
    metrics::MetricReport rep = agan::evaluate_attack(
        model, manifest, extractor,
        j.value("experiment", std::string("eval")));
    img::ensure_parent_dir(report);
    rep.write_csv(report);
    rep.write_aggregate_json(report + ".aggregate.json");
    write_provenance(report,
                     {{"tool", "agan-eval"},
                      {"manifest_hash", manifest.content_hash()},
                      {"model_extractor", model.feature_extractor_name},
                      {"metric_extractor", extractor.name},
                      {"test_keys", manifest.seed_labels()}});
    return {report, report + ".aggregate.json"};
}

std::vector<std::string> stage_report(const StageContext& ctx,
                                      const nlohmann::json& j) {
    const std::string layout_s = j.at("layout").get<std::string>();
    ReportLayout layout;
    if (layout_s == "table1")
        layout = ReportLayout::table1;
    else if (layout_s == "table2")
        layout = ReportLayout::table2;
    else
        throw std::runtime_error("unknown report layout " + layout_s);
    std::vector<metrics::MetricReport> reports;
    for (const auto& p : j.at("inputs"))
        reports.push_back(metrics::MetricReport::read_csv(
            ctx.resolve(p.get<std::string>())));
    if (j.contains("experiments")) {
        // Optional explicit experiment tags (e.g. scheme names for table2).
        const auto tags = j.at("experiments").get<std::vector<std::string>>();
        if (tags.size() != reports.size())
            throw std::runtime_error("experiments/inputs length mismatch");
        for (std::size_t i = 0; i < tags.size(); ++i)
            reports[i].experiment = tags[i];
    }
    const std::string out = ctx.resolve(j.at("out").get<std::string>());
    img::ensure_parent_dir(out);
    emit_report(reports, layout, out);
    return {out};
}

std::vector<std::string> stage_grid(const StageContext& ctx,
                                    const nlohmann::json& j) {
    const auto manifest = surrogate::SurrogateManifest::load(
        ctx.resolve(j.at("manifest").get<std::string>()));
    const int count =
        std::min<int>(j.value("count", 4),
                      static_cast<int>(manifest.records.size()));
    if (count < 1) throw std::runtime_error("grid: empty manifest");

    std::unique_ptr<agan::MasterKeyModel> model;
    if (j.contains("model"))
        model = std::make_unique<agan::MasterKeyModel>(
            agan::MasterKeyModel::load(
                ctx.resolve(j.at("model").get<std::string>())));

    std::vector<surrogate::PairRecord> recs(manifest.records.begin(),
                                            manifest.records.end());
    std::sort(recs.begin(), recs.end(),
              [](const auto& a, const auto& b) { return a.pair_id < b.pair_id; });

    const int cols = model ? 3 : 2;
    const img::ImageTensor first = img::load_image(recs.front().orig_path);
    const int ch = first.height, cw = first.width, gap = 2;
    img::ImageTensor grid(count * ch + (count - 1) * gap,
                          cols * cw + (cols - 1) * gap, 3);
    for (auto& v : grid.data) v = 1.0;

    auto paste = [&](const img::ImageTensor& im, int row, int col) {
        for (int y = 0; y < im.height; ++y)
            for (int x = 0; x < im.width; ++x)
                for (int c = 0; c < 3; ++c)
                    grid.at(row * (ch + gap) + y, col * (cw + gap) + x, c) =
                        im.channels == 3 ? im.at(y, x, c) : im.at(y, x, 0);
    };
    for (int i = 0; i < count; ++i) {
        const img::ImageTensor orig = img::load_image(recs[i].orig_path);
        const img::ImageTensor enc = img::load_image(recs[i].enc_path);
        paste(orig, i, 0);
        paste(enc, i, 1);
        if (model) paste(agan::attack(*model, enc), i, 2);
    }
    const std::string out = ctx.resolve(j.at("out").get<std::string>());
    img::ensure_parent_dir(out);
    img::save_image(grid, out);
    return {out};
}

using StageFn = std::vector<std::string> (*)(const StageContext&,
                                             const nlohmann::json&);

StageFn find_stage(const std::string& type) {
    if (type == "synth") return stage_synth;
    if (type == "embedder") return stage_embedder;
    if (type == "secret-gan") return stage_secret_gan;
    if (type == "pe-pairs") return stage_pe_pairs;
    if (type == "avih-pairs") return stage_avih_pairs;
    if (type == "agan-train") return stage_agan_train;
    if (type == "agan-eval") return stage_agan_eval;
    if (type == "report") return stage_report;
    if (type == "grid") return stage_grid;
    return nullptr;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
    RunResult result;
    StageContext ctx;
    ctx.root = cfg.output_root();
    ctx.global_seed = cfg.seed();

    // Pre-pass: unknown stage types are config errors, not stage failures.
    for (const auto& s : cfg.stages())
        if (!find_stage(s.at("type").get<std::string>())) {
            result.exit_code = kExitConfigError;
            result.error = "unknown stage type " +
                           s.at("type").get<std::string>();
            return result;
        }

    fs::create_directories(ctx.root / ".stages");
    std::uint64_t chain = ctx.global_seed;
    for (const auto& s : cfg.stages()) {
        const std::string name = s.at("name").get<std::string>();
        const std::string type = s.at("type").get<std::string>();
        chain = rng::fnv1a64(s.dump() + std::to_string(chain));
        const fs::path marker = ctx.root / ".stages" / (name + ".json");

        bool skip = false;
        if (fs::exists(marker)) {
            try {
                std::ifstream is(marker);
                nlohmann::json m = nlohmann::json::parse(is);
                if (m.value("hash", 0ull) == chain) {
                    skip = true;
                    for (const auto& out : m.at("outputs"))
                        if (!fs::exists(out.get<std::string>())) {
                            skip = false;
                            break;
                        }
                }
            } catch (...) {
                skip = false;
            }
        }
        if (skip) {
            result.skipped.push_back(name);
            continue;
        }

        try {
            const auto outputs = find_stage(type)(ctx, s);
            nlohmann::json m = {{"hash", chain}, {"outputs", outputs}};
            std::ofstream os(marker);
            os << m.dump(2) << '\n';
            result.executed.push_back(name);
        } catch (const std::exception& e) {
            result.exit_code = kExitStageError;
            result.failed_stage = name;
            result.error = e.what();
            return result;
        }
    }
    return result;
}

namespace {
std::string fmt_cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}
}  // namespace

void emit_report(const std::vector<metrics::MetricReport>& reports,
                 ReportLayout layout, const std::string& out_path) {
    if (reports.empty())
        throw std::invalid_argument("emit_report: no reports");
    std::ofstream os(out_path);
    if (!os) throw std::runtime_error("emit_report: cannot write " + out_path);

    if (layout == ReportLayout::table1) {
        os << "# pek-report table1 v1\n";
        os << "key_label,cosine,ssim,lpips\n";
        for (const auto& rep : reports)
            for (const auto& [label, agg] : rep.aggregates) {
                // Attack rows carry the reconstruction quality per key.
                const std::string suffix = "/attack";
                if (label.size() > suffix.size() &&
                    label.compare(label.size() - suffix.size(), suffix.size(),
                                  suffix) == 0) {
                    os << label.substr(0, label.size() - suffix.size()) << ','
                       << fmt_cell(agg.cosine) << ',' << fmt_cell(agg.ssim)
                       << ',' << fmt_cell(agg.lpips) << '\n';
                } else if (label.find('/') == std::string::npos) {
                    os << label << ',' << fmt_cell(agg.cosine) << ','
                       << fmt_cell(agg.ssim) << ',' << fmt_cell(agg.lpips)
                       << '\n';
                }
            }
        return;
    }

    // table2: methods x schemes LPIPS matrix with published reference cells.
    double our_le = -1.0, our_etc = -1.0;
    for (const auto& rep : reports) {
        double sum = 0.0;
        int n = 0;
        for (const auto& [label, agg] : rep.aggregates) {
            if (label.find("/attack") == std::string::npos) continue;
            sum += agg.lpips;
            ++n;
        }
        if (n == 0) continue;
        const double mean = sum / n;
        if (rep.experiment.find("etc") != std::string::npos)
            our_etc = mean;
        else if (rep.experiment.find("le") != std::string::npos)
            our_le = mean;
    }
    os << "# pek-report table2 v1 (lpips; rows marked ref are published "
          "reference scores)\n";
    os << "method,le,etc\n";
    os << "sia-gan (ref)," << fmt_cell(kRefSiaGanLe) << ','
       << fmt_cell(kRefSiaGanEtc) << '\n';
    os << "gan-based (ref),," << fmt_cell(kRefGanBasedEtc) << '\n';
    os << "ours (full-scale ref)," << fmt_cell(kRefFullScaleLe) << ','
       << fmt_cell(kRefFullScaleEtc) << '\n';
    os << "ours (measured),"
       << (our_le >= 0 ? fmt_cell(our_le) : std::string()) << ','
       << (our_etc >= 0 ? fmt_cell(our_etc) : std::string()) << '\n';
}

}  // namespace pek::harness
