#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pek/metrics.hpp"

namespace pek::harness {

// Exit codes shared by every CLI entry point.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitStageError = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error("stage '" + stage + "': " + what), stage(stage) {}
    std::string stage;
};

// Flat JSON config: experiment name, output root, global seed and an ordered
// stage list; each stage is one object with a "name", a "type" and its
// parameters. Serialization is the JSON document itself, hence lossless.
struct ExperimentConfig {
    nlohmann::json doc;

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_json(const nlohmann::json& j);
    void save(const std::string& path) const;

    std::string experiment() const;
    std::string output_root() const;  // PEK_OUTPUT_ROOT overrides
    std::uint64_t seed() const;
    const nlohmann::json& stages() const;
};

struct RunResult {
    int exit_code = kExitOk;
    std::string failed_stage;
    std::string error;
    std::vector<std::string> executed;
    std::vector<std::string> skipped;
};

// Runs stages in order. Each stage's content hash (its config block chained
// with upstream hashes and the global seed) is recorded under
// <root>/.stages/; a re-run with an unchanged hash and intact outputs is
// skipped. A failing stage stops the run, keeping partial outputs.
RunResult run_experiment(const ExperimentConfig& cfg);

enum class ReportLayout { table1, table2 };

// table1: one row per secret-key label with the attack-quality metrics.
// table2: method x scheme LPIPS matrix; prior-attack cells are fixed
// published reference scores, the measured row comes from the reports
// (scheme read from each report's experiment tag: "le" or "etc").
void emit_report(const std::vector<metrics::MetricReport>& reports,
                 ReportLayout layout, const std::string& out_path);

// Published LPIPS reference scores for the prior attacks compared against,
// and the full-scale reference for this attack; emitted as citation cells.
inline constexpr double kRefSiaGanLe = 0.156;
inline constexpr double kRefSiaGanEtc = 0.211;
inline constexpr double kRefGanBasedEtc = 0.4;
inline constexpr double kRefFullScaleLe = 0.138;
inline constexpr double kRefFullScaleEtc = 0.204;

}  // namespace pek::harness
