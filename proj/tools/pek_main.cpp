// End-to-end experiment runner and report emitter.
#include <cstdio>
#include <filesystem>

#include <CLI11.hpp>

#include "cli_common.hpp"
#include "pek/harness.hpp"
#include "pek/models.hpp"
#include "pek/synth.hpp"

namespace fs = std::filesystem;
using namespace pek;

int main(int argc, char** argv) {
    CLI::App app{"perceptual-encryption security evaluation toolkit"};
    app.require_subcommand(1);

    // run CONFIG
    std::string run_config;
    CLI::App* run = app.add_subcommand("run", "run an experiment config");
    run->add_option("config", run_config, "experiment JSON config")->required();

    // report
    std::string rep_layout, rep_out;
    std::vector<std::string> rep_inputs, rep_experiments;
    CLI::App* rep = app.add_subcommand("report", "emit a result table");
    rep->add_option("--layout", rep_layout, "table1 or table2")
        ->required()
        ->check(CLI::IsMember({"table1", "table2"}));
    rep->add_option("--in", rep_inputs, "metric CSV inputs")->required();
    rep->add_option("--out", rep_out, "output CSV")->required();
    rep->add_option("--experiments", rep_experiments,
                    "override experiment tags (scheme names for table2)");

    // synth
    int sy_count = 16, sy_size = 32;
    std::uint64_t sy_seed = 0;
    std::string sy_out;
    CLI::App* sy = app.add_subcommand("synth", "generate synthetic images");
    sy->add_option("--count", sy_count, "image count");
    sy->add_option("--size", sy_size, "image side length");
    sy->add_option("--seed", sy_seed, "generator seed");
    sy->add_option("--out", sy_out, "output directory")->required();

    // embedder
    std::string em_arch = "tiny_a", em_out;
    int em_size = 32;
    std::uint64_t em_seed = 0;
    CLI::App* em = app.add_subcommand("embedder", "create a desk embedder");
    em->add_option("--arch", em_arch, "architecture identifier");
    em->add_option("--seed", em_seed, "init seed");
    em->add_option("--size", em_size, "input size");
    em->add_option("--out", em_out, "checkpoint path")->required();

    CLI11_PARSE(app, argc, argv);

    return cli::guarded([&]() -> int {
        if (run->parsed()) {
            const harness::ExperimentConfig cfg =
                harness::ExperimentConfig::from_file(run_config);
            const harness::RunResult r = harness::run_experiment(cfg);
            for (const auto& s : r.skipped)
                std::printf("stage %-20s skipped (up to date)\n", s.c_str());
            for (const auto& s : r.executed)
                std::printf("stage %-20s done\n", s.c_str());
            if (r.exit_code != harness::kExitOk)
                std::fprintf(stderr, "failed at stage '%s': %s\n",
                             r.failed_stage.c_str(), r.error.c_str());
            return r.exit_code;
        }
        if (rep->parsed()) {
            std::vector<metrics::MetricReport> reports;
            for (const auto& p : rep_inputs)
                reports.push_back(metrics::MetricReport::read_csv(p));
            if (!rep_experiments.empty()) {
                if (rep_experiments.size() != reports.size())
                    throw std::invalid_argument(
                        "--experiments must match --in count");
                for (std::size_t i = 0; i < reports.size(); ++i)
                    reports[i].experiment = rep_experiments[i];
            }
            harness::emit_report(reports,
                                 rep_layout == "table1"
                                     ? harness::ReportLayout::table1
                                     : harness::ReportLayout::table2,
                                 rep_out);
            std::printf("wrote %s\n", rep_out.c_str());
            return 0;
        }
        if (sy->parsed()) {
            fs::create_directories(sy_out);
            const auto images =
                img::synth_batch(sy_seed, sy_count, sy_size, sy_size);
            for (int i = 0; i < sy_count; ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "img_%05d.png", i);
                img::save_image(images[i], (fs::path(sy_out) / name).string());
            }
            std::printf("wrote %d synthetic images to %s\n", sy_count,
                        sy_out.c_str());
            return 0;
        }
        // embedder
        const auto ex = models::make_desk_embedder(em_seed, em_arch, em_size);
        img::ensure_parent_dir(em_out);
        ex.save(em_out);
        std::printf("embedder %s -> %s\n", ex.name.c_str(), em_out.c_str());
        return 0;
    });
}
