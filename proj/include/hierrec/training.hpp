#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "hierrec/agent.hpp"
#include "hierrec/simulators.hpp"

namespace hierrec {

enum class RewardMode {
    telescoping,    // r_t = (E_t - E_{t-1}) / (E_max - E_b)
    terminal_only,  // r_T = Δ_u, zero before
};

std::string to_string(RewardMode mode);
RewardMode reward_mode_from_string(const std::string& s);

inline constexpr std::array<double, 3> kLearningRateGrid{1e-3, 5e-4, 1e-4};

struct TrainConfig {
    double gamma = 1.0;
    double alpha = 1.0;
    double learning_rate = 1e-4;
    std::size_t episodes = 30000;
    std::size_t batch_size = 32;
    RewardMode reward_mode = RewardMode::telescoping;
    /// Subtract the per-step batch mean of the returns before weighting.
    bool baseline = false;
    double max_grad_norm = 5.0;
    std::size_t warmup_len = 20;
    /// Recommendation steps per episode; 0 means the simulator's max_steps.
    std::size_t steps = 0;
    std::size_t checkpoint_every = 5000;

    /// Throws ConfigError.
    void validate() const;
};

struct StepRecord {
    std::vector<ConceptId> concepts;  // empty when the high level is disabled
    double log_p_concepts = 0.0;
    std::size_t candidate_count = 0;
    QuestionId question;
    double log_p_question = 0.0;
    int correct = 0;
    double predicted = 0.0;  // ŷ_t
    int mastery_after = 0;   // E_t
    double reward = 0.0;
};

struct Trajectory {
    LearningTarget target;
    LearningHistory warmup;
    std::vector<StepRecord> steps;
    int e_before = 0;
    int e_max = 0;
    int e_after = 0;
    double delta = 0.0;

    std::vector<double> rewards() const;
};

/// Tape handles recorded during a rollout, aligned with Trajectory::steps.
struct EpisodeVars {
    std::vector<LearningState> high_states;
    std::vector<LearningState> low_states;
    std::vector<ad::Var> log_p_concepts;  // invalid when the high level is disabled
    std::vector<ad::Var> log_p_question;
    std::vector<ad::Var> predicted;
};

struct RolloutOptions {
    std::size_t steps = 0;
    DecodeMode mode = DecodeMode::sample;
    RewardMode reward_mode = RewardMode::telescoping;
    /// Overrides the agent's k when non-zero.
    std::size_t k = 0;
};

/// Runs `options.steps` recommendations: encode, high-level choice, filter,
/// encode, low-level choice, answer, reward. Forward ops go on `tape`
/// (a forward-only tape is fine); `vars` receives the handles when given.
/// Throws AlreadyMastered if the session starts with every target mastered.
Trajectory rollout(const Agent& agent, SimulatorSession& session, const LearningTarget& target,
                   const LearningHistory& warmup, const RolloutOptions& options, Rng& rng,
                   ad::Tape& tape, EpisodeVars* vars = nullptr);

/// Rebuilds the graph of a recorded trajectory with its recorded choices
/// and answers; no simulator is involved.
EpisodeVars replay(const Agent& agent, const Trajectory& trajectory, ad::Tape& tape,
                   std::size_t k = 0);

/// Discounted returns r̂_t = r_t + γ r̂_{t+1}.
std::vector<double> returns(const std::vector<double>& rewards, double gamma);

/// -Σ weights_t log p_t using the recorded log-probabilities.
double loss_high(const Trajectory& trajectory, const std::vector<double>& weights);
double loss_low(const Trajectory& trajectory, const std::vector<double>& weights);
/// -Σ [y ln ŷ + (1 - y) ln(1 - ŷ)] with ŷ clamped to [1e-7, 1 - 1e-7].
double loss_aux(const Trajectory& trajectory);
double loss_total(double loss_high, double loss_low, double loss_aux, double alpha);

struct EpisodeLosses {
    ad::Var total;
    double high = 0.0;
    double low = 0.0;
    double aux = 0.0;
    double total_value = 0.0;
};

/// Graph version of the three losses; `weights` are the (possibly
/// baselined) returns.
EpisodeLosses build_losses(ad::Tape& tape, const Trajectory& trajectory, const EpisodeVars& vars,
                           const std::vector<double>& weights, double alpha);

/// Resamples targets and seed until the student has something left to
/// learn. Throws AlreadyMastered after 1000 attempts.
struct Episode {
    LearningTarget target;
    SessionStart start;
};
Episode sample_episode(const Simulator& sim, std::size_t warmup_len, std::uint64_t seed);

struct MetricsRow {
    std::size_t episode = 0;
    double delta = 0.0;
    double loss_high = 0.0;
    double loss_low = 0.0;
    double loss_aux = 0.0;
    double loss_total = 0.0;
};

struct TrainResult {
    std::vector<MetricsRow> metrics;
    std::size_t updates = 0;
};

/// Called after every `checkpoint_every` episodes and at the end.
using CheckpointHook = std::function<void(const Agent&, std::size_t episodes_done)>;

/// REINFORCE with Adam over batches of sampled episodes. All randomness comes
/// from `seed` through named sub-streams. On a non-finite loss or gradient
/// the parameters are restored to the last good update and
/// DivergenceDetected is thrown.
TrainResult train_run(const TrainConfig& config, const Simulator& sim, Agent& agent,
                      std::uint64_t seed, const CheckpointHook& on_checkpoint = {});

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

}  // namespace hierrec
