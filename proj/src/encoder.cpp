#include "hierrec/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "hierrec/errors.hpp"
#include "hierrec/rng.hpp"

namespace hierrec {

void EncoderConfig::validate() const {
    if (d_a < 1 || d_z < 1 || d_h < 1 || d_m < 1) throw ConfigError("encoder dims must be >= 1");
    if (heads != 1) throw ConfigError("only single-head attention is supported (heads = 1)");
}

namespace {

Encoder::AttentionParams add_attention(ad::ParamStore& params, const std::string& prefix,
                                       Eigen::Index d_a, Eigen::Index universe, Rng& rng) {
    // A one-hot input has a single active entry; the init bound uses d_a.
    Encoder::AttentionParams p;
    p.query = params.add_uniform(prefix + ".query", d_a, universe, d_a, rng);
    p.key = params.add_uniform(prefix + ".key", d_a, universe, d_a, rng);
    p.value = params.add_uniform(prefix + ".value", d_a, universe, d_a, rng);
    p.onehot_proj = params.add_uniform(prefix + ".onehot_proj", d_a, universe, d_a, rng);
    p.onehot_bias = params.add_zeros(prefix + ".onehot_bias", d_a, 1);
    return p;
}

std::vector<Eigen::Index> to_index(const std::vector<std::int32_t>& set) {
    return {set.begin(), set.end()};
}

}  // namespace

Encoder::Encoder(ad::ParamStore& params, const EncoderConfig& config, std::size_t n_concepts,
                 std::size_t n_questions, Rng& rng)
    : config_(config), n_concepts_(n_concepts), n_questions_(n_questions) {
    config_.validate();
    const auto d_a = static_cast<Eigen::Index>(config_.d_a);
    const auto d_z = static_cast<Eigen::Index>(config_.d_z);
    const auto d_h = static_cast<Eigen::Index>(config_.d_h);
    const auto d_m = static_cast<Eigen::Index>(config_.d_m);
    const auto n = static_cast<Eigen::Index>(n_questions);
    concept_attn_ = add_attention(params, "enc.concept", d_a, static_cast<Eigen::Index>(n_concepts), rng);
    question_attn_ = add_attention(params, "enc.question", d_a, n, rng);
    record_w_ = params.add_uniform("enc.record.w", d_z, n + 1, 2, rng);
    record_b_ = params.add_zeros("enc.record.b", d_z, 1);
    lstm_w_ = params.add_uniform("enc.lstm.w", 4 * d_h, d_z + d_h, d_z + d_h, rng);
    lstm_b_ = params.add_uniform("enc.lstm.b", 4 * d_h, 1, d_z + d_h, rng);
    proj_history_w_ = params.add_uniform("enc.proj_history.w", d_m, d_h, d_h, rng);
    proj_history_b_ = params.add_zeros("enc.proj_history.b", d_m, 1);
    proj_target_w_ = params.add_uniform("enc.proj_target.w", d_m, 2 * d_a, 2 * d_a, rng);
    proj_target_b_ = params.add_zeros("enc.proj_target.b", d_m, 1);
    proj_concepts_w_ = params.add_uniform("enc.proj_concepts.w", d_m, 2 * d_a, 2 * d_a, rng);
    proj_concepts_b_ = params.add_zeros("enc.proj_concepts.b", d_m, 1);
    proj_questions_w_ = params.add_uniform("enc.proj_questions.w", d_m, 2 * d_a, 2 * d_a, rng);
    proj_questions_b_ = params.add_zeros("enc.proj_questions.b", d_m, 1);
    prompt_high_ = params.add_uniform("enc.prompt.high", d_m, 1, d_m, rng);
    prompt_low_ = params.add_uniform("enc.prompt.low", d_m, 1, d_m, rng);
}

void Encoder::check_set(Universe u, const std::vector<std::int32_t>& set) const {
    if (set.empty()) throw EmptySet("cannot encode an empty set");
    const std::size_t size = universe_size(u);
    for (std::int32_t x : set)
        if (x < 0 || static_cast<std::size_t>(x) >= size)
            throw OutOfRangeId("set element " + std::to_string(x) + " outside the universe");
}

ad::Var Encoder::attention(ad::Tape& tape, Universe u, const std::vector<std::int32_t>& set) const {
    check_set(u, set);
    const auto& p = attention_params(u);
    const auto idx = to_index(set);
    ad::Var q = tape.gather_cols(tape.param(p.query), idx);
    ad::Var k = tape.gather_cols(tape.param(p.key), idx);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(config_.d_a));
    return tape.softmax_cols(tape.scale(tape.matmul_tn(k, q), inv_sqrt));
}

ad::Var Encoder::element_reprs(ad::Tape& tape, Universe u, const std::vector<std::int32_t>& set) const {
    ad::Var weights = attention(tape, u, set);
    const auto& p = attention_params(u);
    const auto idx = to_index(set);
    ad::Var values = tape.gather_cols(tape.param(p.value), idx);
    ad::Var attentive = tape.matmul(values, weights);
    ad::Var projected = tape.add(tape.gather_cols(tape.param(p.onehot_proj), idx),
                                 tape.gather_cols(tape.param(p.onehot_bias),
                                                  std::vector<Eigen::Index>(set.size(), 0)));
    return tape.concat_rows({projected, attentive});
}

ElementRepr Encoder::element_repr(const ad::ParamStore& params, Universe u, std::int32_t x,
                                  const std::vector<std::int32_t>& set) const {
    check_set(u, set);
    const auto it = std::find(set.begin(), set.end(), x);
    if (it == set.end()) throw ElementNotInSet("element " + std::to_string(x) + " is not in the set");
    const auto col = static_cast<Eigen::Index>(it - set.begin());
    ad::Tape tape(params, nullptr);
    const ad::Matrix& reprs = tape.value(element_reprs(tape, u, set));
    ElementRepr r;
    r.onehot = ad::Vector::Zero(static_cast<Eigen::Index>(universe_size(u)));
    r.onehot(x) = 1.0;
    const auto d_a = static_cast<Eigen::Index>(config_.d_a);
    r.augmented = reprs.col(col);
    r.attentive = r.augmented.tail(d_a);
    return r;
}

ad::Var Encoder::encode_set(ad::Tape& tape, Universe u, const std::vector<std::int32_t>& set) const {
    return tape.mean_cols(element_reprs(tape, u, set));
}

ad::Var Encoder::encode_target(ad::Tape& tape, const LearningTarget& target) const {
    if (target.size() == 0) throw EmptySet("empty learning target");
    std::vector<std::int32_t> set;
    set.reserve(target.size());
    for (QuestionId q : target.questions()) set.push_back(q.index);
    return encode_set(tape, Universe::questions, set);
}

Encoder::HistoryState Encoder::initial_history(ad::Tape& tape) const {
    const auto d_h = static_cast<Eigen::Index>(config_.d_h);
    return {tape.constant(ad::Matrix::Zero(d_h, 1)), tape.constant(ad::Matrix::Zero(d_h, 1))};
}

Encoder::HistoryState Encoder::push_record(ad::Tape& tape, const HistoryState& state,
                                           const InteractionRecord& record) const {
    if (record.question.index < 0 || record.question.idx() >= n_questions_)
        throw OutOfRangeId("history question " + std::to_string(record.question.index));
    ad::Var w = tape.param(record_w_);
    std::vector<ad::Var> terms{tape.gather_cols(w, {record.question.index}), tape.param(record_b_)};
    if (record.correct)
        terms.push_back(tape.gather_cols(w, {static_cast<Eigen::Index>(n_questions_)}));
    ad::Var z = tape.add(terms);
    auto [h, c] = ad::lstm_cell(tape, tape.param(lstm_w_), tape.param(lstm_b_), z, state.h, state.c);
    return {h, c};
}

ad::Var Encoder::encode_history(ad::Tape& tape, const LearningHistory& history) const {
    HistoryState s = initial_history(tape);
    for (const auto& r : history) s = push_record(tape, s, r);
    return s.h;
}

ad::Var Encoder::prompt_vector(ad::Tape& tape, Level level) const {
    return tape.param(prompt_param(level));
}

ad::Var Encoder::project_history(ad::Tape& tape, ad::Var h) const {
    return tape.affine(tape.param(proj_history_w_), h, tape.param(proj_history_b_));
}

ad::Var Encoder::project_target(ad::Tape& tape, ad::Var g) const {
    return tape.affine(tape.param(proj_target_w_), g, tape.param(proj_target_b_));
}

ad::Var Encoder::project_set(ad::Tape& tape, Level level, ad::Var e) const {
    if (level == Level::high)
        return tape.affine(tape.param(proj_concepts_w_), e, tape.param(proj_concepts_b_));
    return tape.affine(tape.param(proj_questions_w_), e, tape.param(proj_questions_b_));
}

LearningState Encoder::combine(ad::Tape& tape, Level level, ad::Var history_proj,
                               ad::Var target_proj, ad::Var set_proj, ad::Var prompt) const {
    return {level, tape.add({history_proj, target_proj, set_proj, prompt})};
}

LearningState Encoder::fuse(ad::Tape& tape, Level level, ad::Var h, ad::Var g, ad::Var e,
                            ad::Var m) const {
    const auto d_a2 = static_cast<Eigen::Index>(2 * config_.d_a);
    const auto d_h = static_cast<Eigen::Index>(config_.d_h);
    const auto d_m = static_cast<Eigen::Index>(config_.d_m);
    auto is_col = [&](ad::Var v, Eigen::Index rows) {
        return tape.value(v).rows() == rows && tape.value(v).cols() == 1;
    };
    if (!is_col(h, d_h) || !is_col(g, d_a2) || !is_col(e, d_a2) || !is_col(m, d_m))
        throw DimensionMismatch("fuse: inputs must be (d_h, 2 d_a, 2 d_a, d_m) column vectors");
    return combine(tape, level, project_history(tape, h), project_target(tape, g),
                   project_set(tape, level, e), m);
}

}  // namespace hierrec
