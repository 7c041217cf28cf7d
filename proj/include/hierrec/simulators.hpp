#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hierrec/autodiff.hpp"
#include "hierrec/curriculum.hpp"
#include "hierrec/rng.hpp"

namespace hierrec {

/// Three-parameter logistic response: g + (1 - g) / (1 + exp(-1.7 a (θ - b))).
double irt_prob(double discrimination, double difficulty, double guess, double ability);

enum class AnswerMode { sample, threshold };

std::string to_string(AnswerMode mode);
AnswerMode answer_mode_from_string(const std::string& s);

/// A simulated student. Not thread-safe; one owner drives it.
class SimulatorSession {
public:
    virtual ~SimulatorSession() = default;

    /// Probability of a correct answer to `q` in the current state.
    virtual double correct_prob(QuestionId q) const = 0;

    /// Answers `q` and updates the student. Throws StepLimitExceeded once
    /// max_steps answers have been given since reset.
    int answer(QuestionId q);

    /// Number of targets answered correctly with probability >= 0.5.
    /// Does not touch state.
    int mastery(const LearningTarget& targets) const;

    /// E_b: mastery measured when reset finished.
    int initial_mastery() const noexcept { return initial_mastery_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t max_steps() const noexcept { return max_steps_; }

protected:
    SimulatorSession(std::uint64_t seed, AnswerMode mode, std::size_t max_steps)
        : rng_(seed), mode_(mode), max_steps_(max_steps) {}

    virtual void advance(QuestionId q, int correct) = 0;

    /// Draws a correctness label without counting a step (warm-up).
    int respond(QuestionId q);

    Rng rng_;
    int initial_mastery_ = 0;

private:
    AnswerMode mode_;
    std::size_t max_steps_;
    std::size_t steps_ = 0;

    friend class KssSimulator;
    friend class KtSimulator;
};

struct SessionStart {
    std::unique_ptr<SimulatorSession> session;
    LearningHistory history;  // warm-up records
};

class Simulator {
public:
    virtual ~Simulator() = default;

    virtual std::string kind() const = 0;
    virtual const CurriculumMap& curriculum() const = 0;
    virtual std::size_t max_steps() const = 0;

    /// Draws a learning target for a new student.
    virtual LearningTarget sample_targets(Rng& rng) const = 0;

    /// Fresh student: internal state initialized from `seed`, then
    /// `warmup_len` uniformly random questions are answered. E_b is taken at
    /// the end of the warm-up.
    virtual SessionStart reset(const LearningTarget& targets, std::size_t warmup_len,
                               std::uint64_t seed) const = 0;
};

// ---------------------------------------------------------------------------
// Rule-based IRT student.

struct KssConfig {
    std::size_t n_items = 10;
    /// (prerequisite, concept) pairs; must form a DAG.
    std::vector<std::pair<std::int32_t, std::int32_t>> prerequisite_edges;
    double discrimination = 1.0;
    /// One difficulty per question; empty means all zero.
    std::vector<double> difficulty;
    double guess = 0.1;
    double mastery_gain = 1.0;
    double locked_gain = 0.1;
    double prereq_threshold = 2.0;
    double ability_cap = 3.0;
    std::size_t max_steps = 30;
    /// Initial abilities are uniform in [0, init_ability_max].
    double init_ability_max = 1.0;
    std::size_t target_min = 3;
    std::size_t target_max = 6;
    AnswerMode answer_mode = AnswerMode::sample;

    /// Ten concepts, one question each, chained prerequisites.
    static KssConfig reference();
};

/// Abilities of a KSS session (for inspection in tests); empty for other kinds.
std::vector<double> kss_abilities(const SimulatorSession& session);

class KssSimulator final : public Simulator {
public:
    /// Throws ConfigError when the config does not fit the curriculum or the
    /// prerequisite graph has a cycle.
    KssSimulator(CurriculumMap curriculum, KssConfig config);

    /// Reference ten-item simulator on a one-to-one curriculum.
    static KssSimulator reference();

    /// Random layered prerequisite DAG and depth-dependent difficulties on a
    /// given curriculum.
    static KssConfig synthetic_config(const CurriculumMap& curriculum, Rng& rng);

    std::string kind() const override { return "kss"; }
    const CurriculumMap& curriculum() const override { return curriculum_; }
    std::size_t max_steps() const override { return config_.max_steps; }
    const KssConfig& config() const noexcept { return config_; }

    LearningTarget sample_targets(Rng& rng) const override;
    SessionStart reset(const LearningTarget& targets, std::size_t warmup_len,
                       std::uint64_t seed) const override;

    /// Starts a session from explicit abilities (no warm-up); used by tests.
    std::unique_ptr<SimulatorSession> session_with_abilities(std::vector<double> abilities,
                                                             std::uint64_t seed) const;

    const std::vector<std::vector<std::int32_t>>& prerequisites() const noexcept {
        return prerequisites_;
    }

private:
    class Session;
    friend std::vector<double> kss_abilities(const SimulatorSession& session);

    CurriculumMap curriculum_;
    KssConfig config_;
    std::vector<std::vector<std::int32_t>> prerequisites_;  // per concept
};


// ---------------------------------------------------------------------------
// Deep-knowledge-tracing model and the data-driven simulator built on it.

struct DktTrainConfig {
    std::size_t hidden_dim = 32;
    std::size_t embed_dim = 32;
    std::size_t epochs = 8;
    std::size_t batch_size = 32;
    double learning_rate = 5e-3;
    double heldout_fraction = 0.2;
    double max_grad_norm = 5.0;
    std::uint64_t seed = 7;
};

/// LSTM over (question, correctness) one-hot inputs with a per-question
/// logistic output head.
class KtModel {
public:
    static constexpr const char* kSchema = "hierrec.ktmodel.v1";

    struct State {
        ad::Vector h;
        ad::Vector c;
    };

    KtModel(std::size_t n_questions, std::size_t embed_dim, std::size_t hidden_dim, Rng& rng);

    std::size_t num_questions() const noexcept { return n_questions_; }
    std::size_t hidden_dim() const noexcept { return hidden_dim_; }
    std::size_t embed_dim() const noexcept { return embed_dim_; }

    State initial_state() const;
    State step(const State& s, InteractionRecord record) const;
    double predict(const State& s, QuestionId q) const;
    /// P(correct on q | history). Deterministic.
    double predict(const LearningHistory& history, QuestionId q) const;

    /// Sum of next-answer BCE over `history` recorded on `tape`; returns the
    /// loss var (1x1) and writes the per-record predicted probabilities.
    ad::Var sequence_loss(ad::Tape& tape, const LearningHistory& history,
                          std::vector<double>* predictions = nullptr) const;

    ad::ParamStore& params() noexcept { return params_; }
    const ad::ParamStore& params() const noexcept { return params_; }

    void save(const std::filesystem::path& path) const;
    static KtModel load(const std::filesystem::path& path);

private:
    KtModel() = default;
    void define(Rng& rng);

    std::size_t n_questions_ = 0;
    std::size_t embed_dim_ = 0;
    std::size_t hidden_dim_ = 0;
    ad::ParamStore params_;
    ad::ParamId embed_, lstm_w_, lstm_b_, out_w_, out_b_;
};

struct DktTrainReport {
    std::size_t train_sessions = 0;
    std::size_t heldout_sessions = 0;
    std::vector<double> epoch_loss;  // mean BCE per prediction
    /// Empty when the held-out labels are single-class.
    std::optional<double> heldout_auc;
};

struct DktTrainResult {
    KtModel model;
    DktTrainReport report;
};

/// Throws InsufficientData when no history is non-empty.
DktTrainResult dkt_train(const std::vector<LearningHistory>& histories, std::size_t n_questions,
                         const DktTrainConfig& config);

/// Area under the ROC curve with tied scores averaged; empty for single-class labels.
std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct KtSimConfig {
    std::size_t hidden_dim = 32;
    std::size_t warmup_len = 20;
    std::size_t n_targets = 400;
    std::size_t max_steps = 200;
    AnswerMode answer_mode = AnswerMode::sample;
};

class KtSimulator final : public Simulator {
public:
    KtSimulator(CurriculumMap curriculum, std::shared_ptr<const KtModel> model, KtSimConfig config);

    std::string kind() const override { return "kt"; }
    const CurriculumMap& curriculum() const override { return curriculum_; }
    std::size_t max_steps() const override { return config_.max_steps; }
    const KtSimConfig& config() const noexcept { return config_; }

    LearningTarget sample_targets(Rng& rng) const override;
    SessionStart reset(const LearningTarget& targets, std::size_t warmup_len,
                       std::uint64_t seed) const override;

private:
    class Session;

    CurriculumMap curriculum_;
    std::shared_ptr<const KtModel> model_;
    KtSimConfig config_;
};

}  // namespace hierrec
