#include "hierrec/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hierrec/errors.hpp"

namespace hierrec {

std::string to_string(BackboneKind kind) {
    return kind == BackboneKind::mlp_pointer ? "mlp_pointer" : "linear";
}

BackboneKind backbone_kind_from_string(const std::string& s) {
    if (s == "mlp_pointer") return BackboneKind::mlp_pointer;
    if (s == "linear") return BackboneKind::linear;
    throw ConfigError("backbone kind must be 'mlp_pointer' or 'linear', got '" + s + "'");
}

std::string to_string(DecodeMode mode) { return mode == DecodeMode::sample ? "sample" : "greedy"; }

DecodeMode decode_mode_from_string(const std::string& s) {
    if (s == "sample") return DecodeMode::sample;
    if (s == "greedy") return DecodeMode::greedy;
    throw ConfigError("decode mode must be 'sample' or 'greedy', got '" + s + "'");
}

double ActionDistribution::prob(std::int32_t action) const {
    double p = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i)
        if (support[i] == action) p = probs[i];
    return p;
}

DecisionNetwork::DecisionNetwork(ad::ParamStore& params, const std::string& prefix,
                                 const BackboneConfig& config, std::size_t d_m,
                                 std::size_t n_actions, Rng& rng)
    : config_(config), n_actions_(n_actions) {
    const auto d = static_cast<Eigen::Index>(d_m);
    if (config_.kind == BackboneKind::linear) {
        backbone_.push_back(params.add_uniform(prefix + ".backbone.linear.w", d, d, d, rng));
        backbone_.push_back(params.add_zeros(prefix + ".backbone.linear.b", d, 1));
    } else {
        if (config_.depth < 1) throw ConfigError("backbone depth must be >= 1");
        for (std::size_t l = 0; l < config_.depth; ++l) {
            const std::string base = prefix + ".backbone.layer" + std::to_string(l);
            backbone_.push_back(params.add_uniform(base + ".w", d, d, d, rng));
            backbone_.push_back(params.add_zeros(base + ".b", d, 1));
        }
    }
    embeddings_ = params.add_uniform(prefix + ".action_embeddings", d, static_cast<Eigen::Index>(n_actions), d, rng);
}

ad::Var DecisionNetwork::transform(ad::Tape& tape, ad::Var state) const {
    if (config_.kind == BackboneKind::linear)
        return tape.affine(tape.param(backbone_[0]), state, tape.param(backbone_[1]));
    ad::Var u = state;
    for (std::size_t l = 0; l < backbone_.size(); l += 2)
        u = tape.add(u, tape.tanh(tape.affine(tape.param(backbone_[l]), u, tape.param(backbone_[l + 1]))));
    return u;
}

ad::Var DecisionNetwork::score_actions(ad::Tape& tape, ad::Var state,
                                       const std::vector<std::int32_t>& actions) const {
    if (actions.empty()) throw EmptyActionSet("no actions to score");
    std::vector<Eigen::Index> idx;
    idx.reserve(actions.size());
    for (std::int32_t a : actions) {
        if (a < 0 || static_cast<std::size_t>(a) >= n_actions_)
            throw OutOfRangeId("action " + std::to_string(a) + " outside the action table");
        idx.push_back(a);
    }
    return tape.matmul_tn(tape.gather_cols(tape.param(embeddings_), idx), transform(tape, state));
}

PolicyDecision decide(ad::Tape& tape, Level level, ad::Var logits,
                      const std::vector<std::int32_t>& actions, std::size_t k, DecodeMode mode,
                      Rng& rng) {
    if (actions.empty()) throw EmptyActionSet("no actions to choose from");
    if (k == 0 || k > actions.size())
        throw KTooLarge("cannot choose " + std::to_string(k) + " of " +
                        std::to_string(actions.size()) + " actions");
    ad::Var logp = tape.log_softmax(logits);
    const ad::Matrix lp = tape.value(logp);

    PolicyDecision d;
    d.level = level;
    d.distribution.support = actions;
    d.distribution.probs.resize(actions.size());
    for (std::size_t i = 0; i < actions.size(); ++i)
        d.distribution.probs[i] = std::exp(lp(static_cast<Eigen::Index>(i), 0));

    std::vector<std::size_t> picked;
    if (k == actions.size()) {
        picked.resize(k);
        std::iota(picked.begin(), picked.end(), std::size_t{0});
    } else if (mode == DecodeMode::greedy) {
        std::vector<std::size_t> order(actions.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double pa = d.distribution.probs[a], pb = d.distribution.probs[b];
            return pa != pb ? pa > pb : actions[a] < actions[b];
        });
        picked.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
        std::vector<double> weights = d.distribution.probs;
        for (std::size_t draw = 0; draw < k; ++draw) {
            const std::size_t i = rng.categorical(weights);
            picked.push_back(i);
            weights[i] = 0.0;
        }
    }

    std::vector<ad::Var> terms;
    for (std::size_t i : picked) {
        d.chosen.push_back(actions[i]);
        d.log_prob += lp(static_cast<Eigen::Index>(i), 0);
        terms.push_back(tape.pick(logp, static_cast<Eigen::Index>(i)));
    }
    d.log_prob_var = terms.size() == 1 ? terms[0] : tape.weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
    return d;
}

PolicyDecision evaluate_choice(ad::Tape& tape, Level level, ad::Var logits,
                               const std::vector<std::int32_t>& actions,
                               const std::vector<std::int32_t>& chosen) {
    if (actions.empty()) throw EmptyActionSet("no actions to choose from");
    ad::Var logp = tape.log_softmax(logits);
    const ad::Matrix lp = tape.value(logp);
    PolicyDecision d;
    d.level = level;
    d.distribution.support = actions;
    for (std::size_t i = 0; i < actions.size(); ++i)
        d.distribution.probs.push_back(std::exp(lp(static_cast<Eigen::Index>(i), 0)));
    std::vector<ad::Var> terms;
    for (std::int32_t c : chosen) {
        const auto it = std::find(actions.begin(), actions.end(), c);
        if (it == actions.end()) throw ElementNotInSet("chosen action " + std::to_string(c) + " not scored");
        const auto i = static_cast<Eigen::Index>(it - actions.begin());
        d.chosen.push_back(c);
        d.log_prob += lp(i, 0);
        terms.push_back(tape.pick(logp, i));
    }
    if (terms.empty()) throw InvalidArgument("evaluate_choice needs at least one choice");
    d.log_prob_var = terms.size() == 1 ? terms[0] : tape.weighted_sum(terms, std::vector<double>(terms.size(), 1.0));
    return d;
}

PolicyDecision high_step(ad::Tape& tape, const DecisionNetwork& net, const LearningState& state,
                         std::size_t n_concepts, std::size_t k, DecodeMode mode, Rng& rng) {
    if (k == 0 || k > n_concepts)
        throw KTooLarge("k = " + std::to_string(k) + " with " + std::to_string(n_concepts) + " concepts");
    std::vector<std::int32_t> concepts(n_concepts);
    std::iota(concepts.begin(), concepts.end(), 0);
    ad::Var logits = net.score_actions(tape, state.vector, concepts);
    return decide(tape, Level::high, logits, concepts, k, mode, rng);
}

PolicyDecision low_step(ad::Tape& tape, const DecisionNetwork& net, const LearningState& state,
                        const std::vector<QuestionId>& candidates, DecodeMode mode, Rng& rng) {
    if (candidates.empty()) throw EmptyCandidateSet("low-level step with no candidates");
    std::vector<std::int32_t> actions;
    actions.reserve(candidates.size());
    for (QuestionId q : candidates) actions.push_back(q.index);
    ad::Var logits = net.score_actions(tape, state.vector, actions);
    return decide(tape, Level::low, logits, actions, 1, mode, rng);
}

PolicyDecision flat_step(ad::Tape& tape, const DecisionNetwork& net, const LearningState& state,
                         std::size_t n_questions, DecodeMode mode, Rng& rng) {
    std::vector<QuestionId> all;
    all.reserve(n_questions);
    for (std::size_t q = 0; q < n_questions; ++q) all.emplace_back(q);
    return low_step(tape, net, state, all, mode, rng);
}

}  // namespace hierrec
