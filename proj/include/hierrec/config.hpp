#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hierrec/agent.hpp"
#include "hierrec/evaluation.hpp"
#include "hierrec/simulators.hpp"
#include "hierrec/training.hpp"

namespace hierrec {

enum class CurriculumSource { kss_reference, synthetic, csv };

struct CurriculumSection {
    CurriculumSource source = CurriculumSource::kss_reference;
    std::string path;  // csv source only
    std::size_t m = 50;
    std::size_t n = 600;
    double extra_concept_prob = 0.1;
};

struct KssSection {
    /// "reference" requires the kss_reference curriculum; "synthetic" draws a
    /// layered prerequisite graph over any curriculum.
    std::string preset = "reference";
    double discrimination = 1.0;
    double guess = 0.1;
    double mastery_gain = 1.0;
    double locked_gain = 0.1;
    double prereq_threshold = 2.0;
    double ability_cap = 3.0;
    std::size_t max_steps = 30;
    double init_ability_max = 1.0;
    std::size_t target_min = 3;
    std::size_t target_max = 6;
    AnswerMode answer_mode = AnswerMode::sample;
};

struct KtSection {
    std::string model_path;  // empty: <output_dir>/checkpoints/kt_model.ckpt
    KtSimConfig sim;
    DktTrainConfig train;
};

struct LogsSection {
    std::string path;  // empty: <output_dir>/logs/interactions.csv
    std::size_t students = 5000;
    std::size_t steps = 100;
};

struct SimulatorSection {
    std::string kind = "kss";
    KssSection kss;
    KtSection kt;
    LogsSection logs;
};

struct SweepSection {
    SweepAxis axis = SweepAxis::k_concepts;
    std::vector<std::size_t> values{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
};

struct EvaluationSection {
    EvalProtocol protocol;
    DecodeMode decode = DecodeMode::greedy;
    std::string checkpoint;  // empty: <output_dir>/checkpoints/policy.ckpt
    bool include_random = true;
    SweepSection sweep;
};

struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::string output_dir = "runs/default";
    CurriculumSection curriculum;
    SimulatorSection simulator;
    ModelConfig model;  // "encoder" and "policy" sections
    TrainConfig training;
    EvaluationSection evaluation;

    /// Cross-section checks. Throws ConfigError.
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);

/// Reads a config tree. Missing keys keep their defaults; unknown keys and
/// wrongly typed values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Applies `section.key=value` overrides. The value is parsed according to
/// the type of the existing leaf; lists take JSON syntax. Throws ConfigError.
void apply_overrides(nlohmann::json& tree, const std::vector<std::string>& overrides);

/// Loads a JSON file (empty path: defaults), applies overrides, validates.
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

std::string to_string(CurriculumSource source);

}  // namespace hierrec
