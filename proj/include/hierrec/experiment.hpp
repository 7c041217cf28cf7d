#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hierrec/config.hpp"

namespace hierrec {

/// Fixed output layout below the configured output directory.
struct Workspace {
    std::filesystem::path root;

    explicit Workspace(std::filesystem::path r) : root(std::move(r)) {}
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path metrics() const { return root / "metrics"; }
    std::filesystem::path results() const { return root / "results"; }
    std::filesystem::path plots() const { return root / "plots"; }
    std::filesystem::path logs() const { return root / "logs"; }
    void create() const;
};

struct CurriculumContext {
    CurriculumMap map;
    IdDictionary questions;
    IdDictionary concepts;
};

CurriculumContext build_curriculum(const ExperimentConfig& config);

/// KSS simulator per the config. `max_steps` overrides the configured limit
/// when non-zero (log generation runs longer sessions).
std::unique_ptr<KssSimulator> build_kss(const ExperimentConfig& config, const CurriculumMap& map,
                                        std::size_t max_steps = 0);

/// The simulator named by simulator.kind; the KT model is loaded from disk.
std::unique_ptr<Simulator> build_simulator(const ExperimentConfig& config, const CurriculumContext& ctx);

std::filesystem::path logs_path(const ExperimentConfig& config);
std::filesystem::path kt_model_path(const ExperimentConfig& config);
std::filesystem::path policy_path(const ExperimentConfig& config);

/// Interaction logs from the KSS oracle driven by uniformly random questions.
std::vector<RawLogRow> generate_logs(const KssSimulator& sim, const IdDictionary& questions,
                                     std::size_t students, std::size_t steps, std::uint64_t seed);

struct GenLogsSummary {
    std::filesystem::path path;
    std::size_t rows = 0;
};
GenLogsSummary cmd_gen_logs(const ExperimentConfig& config, std::ostream& log);

struct TrainKtSummary {
    std::filesystem::path model_path;
    DktTrainReport report;
    std::size_t skipped_rows = 0;
};
TrainKtSummary cmd_train_kt(const ExperimentConfig& config, std::ostream& log);

struct TrainSummary {
    std::filesystem::path checkpoint;
    std::filesystem::path metrics;
    std::size_t episodes = 0;
    double first_window_delta = 0.0;  // mean Δ_u over the first 100 episodes
    double last_window_delta = 0.0;   // mean Δ_u over the last 100 episodes
};
/// On divergence the last good parameters are saved before rethrowing.
TrainSummary cmd_train(const ExperimentConfig& config, std::ostream& log);

struct EvaluateSummary {
    std::vector<EvalResult> results;  // policy first, then the random baseline
    std::vector<std::filesystem::path> files;
};
EvaluateSummary cmd_evaluate(const ExperimentConfig& config, std::ostream& log);

struct SweepSummary {
    std::vector<SweepRow> rows;
    std::vector<std::filesystem::path> files;
};
SweepSummary cmd_sweep(const ExperimentConfig& config, std::ostream& log);

/// "0.8123" or "undefined (single-class held-out labels)".
std::string format_auc(const std::optional<double>& auc);

}  // namespace hierrec
