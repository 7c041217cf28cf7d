#pragma once

#include <vector>

#include "hierrec/autodiff.hpp"
#include "hierrec/curriculum.hpp"

namespace hierrec {

enum class Level { high, low };

struct EncoderConfig {
    std::size_t d_a = 64;   // attentive element dim
    std::size_t d_z = 64;   // record dim
    std::size_t d_h = 128;  // history dim
    std::size_t d_m = 256;  // learning-state dim
    std::size_t heads = 1;

    /// Throws ConfigError.
    void validate() const;
};

/// Which one-hot universe a set is drawn from.
enum class Universe { concepts, questions };

/// Dense representation of one element inside a set.
struct ElementRepr {
    ad::Vector onehot;     // |universe|
    ad::Vector attentive;  // d_a
    ad::Vector augmented;  // 2 d_a: [f_o(onehot); attentive]
};

/// Learning-state vector of one decision level, living on a tape.
struct LearningState {
    Level level = Level::high;
    ad::Var vector;
};

/// Turns sets, targets, histories and the per-level prompt into learning
/// states. Parameters live in a caller-owned ParamStore under "enc.".
class Encoder {
public:
    Encoder(ad::ParamStore& params, const EncoderConfig& config, std::size_t n_concepts,
            std::size_t n_questions, Rng& rng);

    const EncoderConfig& config() const noexcept { return config_; }
    std::size_t universe_size(Universe u) const noexcept {
        return u == Universe::concepts ? n_concepts_ : n_questions_;
    }

    /// Augmented representations of every element of `set` (2 d_a x |set|),
    /// each element attending over the whole set.
    ad::Var element_reprs(ad::Tape& tape, Universe u, const std::vector<std::int32_t>& set) const;
    /// Attention matrix A (|set| x |set|); column j holds element j's weights.
    ad::Var attention(ad::Tape& tape, Universe u, const std::vector<std::int32_t>& set) const;
    /// Throws ElementNotInSet, EmptySet.
    ElementRepr element_repr(const ad::ParamStore& params, Universe u, std::int32_t x,
                             const std::vector<std::int32_t>& set) const;

    /// Mean of the augmented element representations (2 d_a). Throws EmptySet.
    ad::Var encode_set(ad::Tape& tape, Universe u, const std::vector<std::int32_t>& set) const;
    ad::Var encode_target(ad::Tape& tape, const LearningTarget& target) const;

    struct HistoryState {
        ad::Var h;
        ad::Var c;
    };
    HistoryState initial_history(ad::Tape& tape) const;
    /// One recurrent step on the record embedding f_z([onehot(q); y]).
    HistoryState push_record(ad::Tape& tape, const HistoryState& state,
                             const InteractionRecord& record) const;
    /// h_t after consuming `history` left to right; zero for an empty history.
    ad::Var encode_history(ad::Tape& tape, const LearningHistory& history) const;

    ad::Var prompt_vector(ad::Tape& tape, Level level) const;

    ad::Var project_history(ad::Tape& tape, ad::Var h) const;
    ad::Var project_target(ad::Tape& tape, ad::Var g) const;
    ad::Var project_set(ad::Tape& tape, Level level, ad::Var e) const;
    /// Sum of already projected parts plus the prompt vector.
    LearningState combine(ad::Tape& tape, Level level, ad::Var history_proj, ad::Var target_proj,
                          ad::Var set_proj, ad::Var prompt) const;
    /// s = f_p1(h) + f_p2(g) + f_p3|4(e) + m. Throws DimensionMismatch.
    LearningState fuse(ad::Tape& tape, Level level, ad::Var h, ad::Var g, ad::Var e, ad::Var m) const;

    struct AttentionParams {
        ad::ParamId query, key, value, onehot_proj, onehot_bias;
    };
    const AttentionParams& attention_params(Universe u) const noexcept {
        return u == Universe::concepts ? concept_attn_ : question_attn_;
    }
    ad::ParamId prompt_param(Level level) const noexcept {
        return level == Level::high ? prompt_high_ : prompt_low_;
    }

private:
    void check_set(Universe u, const std::vector<std::int32_t>& set) const;

    EncoderConfig config_;
    std::size_t n_concepts_;
    std::size_t n_questions_;
    AttentionParams concept_attn_;
    AttentionParams question_attn_;
    ad::ParamId record_w_, record_b_;
    ad::ParamId lstm_w_, lstm_b_;
    ad::ParamId proj_history_w_, proj_history_b_;
    ad::ParamId proj_target_w_, proj_target_b_;
    ad::ParamId proj_concepts_w_, proj_concepts_b_;
    ad::ParamId proj_questions_w_, proj_questions_b_;
    ad::ParamId prompt_high_, prompt_low_;
};

}  // namespace hierrec
