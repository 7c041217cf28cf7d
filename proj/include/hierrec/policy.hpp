#pragma once

#include <string>
#include <vector>

#include "hierrec/autodiff.hpp"
#include "hierrec/curriculum.hpp"
#include "hierrec/encoder.hpp"
#include "hierrec/rng.hpp"

namespace hierrec {

enum class BackboneKind {
    mlp_pointer,  // residual tanh stack + pointer scoring
    linear,       // single linear map + pointer scoring
};

std::string to_string(BackboneKind kind);
BackboneKind backbone_kind_from_string(const std::string& s);

struct BackboneConfig {
    BackboneKind kind = BackboneKind::mlp_pointer;
    std::size_t depth = 2;
};

enum class DecodeMode { sample, greedy };

std::string to_string(DecodeMode mode);
DecodeMode decode_mode_from_string(const std::string& s);

struct ActionDistribution {
    std::vector<std::int32_t> support;  // action ids, in scoring order
    std::vector<double> probs;

    /// Probability of `action`; 0 when outside the support.
    double prob(std::int32_t action) const;
};

struct PolicyDecision {
    Level level = Level::high;
    ActionDistribution distribution;
    std::vector<std::int32_t> chosen;
    /// Σ log p over the chosen actions.
    double log_prob = 0.0;
    ad::Var log_prob_var;
};

/// Maps a learning state to logits over a variable action list:
/// u = backbone(s), logit_a = <u, embedding_a>.
class DecisionNetwork {
public:
    DecisionNetwork(ad::ParamStore& params, const std::string& prefix, const BackboneConfig& config,
                    std::size_t d_m, std::size_t n_actions, Rng& rng);

    std::size_t num_actions() const noexcept { return n_actions_; }

    ad::Var transform(ad::Tape& tape, ad::Var state) const;
    /// Logits (|actions| x 1). Throws EmptyActionSet, OutOfRangeId.
    ad::Var score_actions(ad::Tape& tape, ad::Var state, const std::vector<std::int32_t>& actions) const;

    /// Parameters of the state transform (not the action embeddings).
    const std::vector<ad::ParamId>& backbone_params() const noexcept { return backbone_; }
    ad::ParamId embeddings() const noexcept { return embeddings_; }

private:
    BackboneConfig config_;
    std::size_t n_actions_;
    std::vector<ad::ParamId> backbone_;  // (w, b) pairs
    ad::ParamId embeddings_;
};

/// Softmax over `actions` followed by selection. `k` distinct actions are
/// chosen: sample mode draws without replacement from the renormalized
/// remainder, greedy mode takes the top-k (ties: smallest id).
PolicyDecision decide(ad::Tape& tape, Level level, ad::Var logits,
                      const std::vector<std::int32_t>& actions, std::size_t k, DecodeMode mode,
                      Rng& rng);

/// Distribution and log-probability for already chosen actions (replay).
/// Throws ElementNotInSet when a choice is outside `actions`.
PolicyDecision evaluate_choice(ad::Tape& tape, Level level, ad::Var logits,
                               const std::vector<std::int32_t>& actions,
                               const std::vector<std::int32_t>& chosen);

/// High-level step over the full concept set. Throws KTooLarge when k is 0
/// or exceeds the concept count.
PolicyDecision high_step(ad::Tape& tape, const DecisionNetwork& net, const LearningState& state,
                         std::size_t n_concepts, std::size_t k, DecodeMode mode, Rng& rng);

/// Low-level step; the distribution is supported exactly on `candidates`.
/// Throws EmptyCandidateSet.
PolicyDecision low_step(ad::Tape& tape, const DecisionNetwork& net, const LearningState& state,
                        const std::vector<QuestionId>& candidates, DecodeMode mode, Rng& rng);

/// low_step over every question.
PolicyDecision flat_step(ad::Tape& tape, const DecisionNetwork& net, const LearningState& state,
                         std::size_t n_questions, DecodeMode mode, Rng& rng);

}  // namespace hierrec
