#include "hierrec/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>

#include "hierrec/errors.hpp"
#include "hierrec/optim.hpp"

namespace hierrec {

std::string to_string(RewardMode mode) {
    return mode == RewardMode::telescoping ? "telescoping" : "terminal_only";
}

RewardMode reward_mode_from_string(const std::string& s) {
    if (s == "telescoping") return RewardMode::telescoping;
    if (s == "terminal_only") return RewardMode::terminal_only;
    throw ConfigError("reward_mode must be 'telescoping' or 'terminal_only', got '" + s + "'");
}

void TrainConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in [0, 1]");
    if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
    if (std::find(kLearningRateGrid.begin(), kLearningRateGrid.end(), learning_rate) ==
        kLearningRateGrid.end())
        throw ConfigError("learning_rate must be one of 1e-3, 5e-4, 1e-4");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
}

std::vector<double> Trajectory::rewards() const {
    std::vector<double> r;
    r.reserve(steps.size());
    for (const auto& s : steps) r.push_back(s.reward);
    return r;
}

namespace {

std::vector<std::int32_t> to_actions(const std::vector<QuestionId>& qs) {
    std::vector<std::int32_t> out;
    out.reserve(qs.size());
    for (QuestionId q : qs) out.push_back(q.index);
    return out;
}

/// Per-episode graph state: the running history encoding plus the
/// projections that stay fixed for the whole episode.
class EpisodeGraph {
public:
    EpisodeGraph(const Agent& agent, ad::Tape& tape, const LearningTarget& target,
                 const LearningHistory& warmup)
        : agent_(agent), enc_(agent.encoder()), tape_(tape) {
        history_ = enc_.initial_history(tape_);
        for (const auto& r : warmup) history_ = enc_.push_record(tape_, history_, r);
        target_proj_ = enc_.project_target(tape_, enc_.encode_target(tape_, target));
    }

    ad::Var history() const { return history_.h; }

    LearningState high_state() {
        if (!concepts_proj_.valid()) {
            std::vector<std::int32_t> all(agent_.curriculum().num_concepts());
            std::iota(all.begin(), all.end(), 0);
            concepts_proj_ =
                enc_.project_set(tape_, Level::high, enc_.encode_set(tape_, Universe::concepts, all));
        }
        return enc_.combine(tape_, Level::high, history_proj(), target_proj_, concepts_proj_,
                            enc_.prompt_vector(tape_, Level::high));
    }

    LearningState low_state(const std::vector<std::int32_t>& candidates) {
        auto it = candidate_proj_.find(candidates);
        if (it == candidate_proj_.end()) {
            ad::Var e = enc_.encode_set(tape_, Universe::questions, candidates);
            it = candidate_proj_.emplace(candidates, enc_.project_set(tape_, Level::low, e)).first;
        }
        return enc_.combine(tape_, Level::low, history_proj(), target_proj_, it->second,
                            enc_.prompt_vector(tape_, Level::low));
    }

    ad::Var predicted() { return agent_.predict_correct(tape_, history_.h); }

    void push(const InteractionRecord& r) {
        history_ = enc_.push_record(tape_, history_, r);
        history_proj_ = ad::Var{};
    }

private:
    ad::Var history_proj() {
        if (!history_proj_.valid()) history_proj_ = enc_.project_history(tape_, history_.h);
        return history_proj_;
    }

    const Agent& agent_;
    const Encoder& enc_;
    ad::Tape& tape_;
    Encoder::HistoryState history_;
    ad::Var history_proj_;
    ad::Var target_proj_;
    ad::Var concepts_proj_;
    std::map<std::vector<std::int32_t>, ad::Var> candidate_proj_;
};

std::vector<std::int32_t> all_questions(const CurriculumMap& map) {
    std::vector<std::int32_t> all(map.num_questions());
    std::iota(all.begin(), all.end(), 0);
    return all;
}

}  // namespace

Trajectory rollout(const Agent& agent, SimulatorSession& session, const LearningTarget& target,
                   const LearningHistory& warmup, const RolloutOptions& options, Rng& rng,
                   ad::Tape& tape, EpisodeVars* vars) {
    Trajectory traj;
    traj.target = target;
    traj.warmup = warmup;
    traj.e_max = static_cast<int>(target.size());
    traj.e_before = session.mastery(target);
    if (traj.e_before >= traj.e_max)
        throw AlreadyMastered("every target is mastered before the first recommendation");
    const double span = static_cast<double>(traj.e_max - traj.e_before);

    const CurriculumMap& map = agent.curriculum();
    const bool hierarchical = !agent.config().policy.disable_high;
    const std::size_t k = options.k ? options.k : agent.config().policy.k;
    const auto everything = hierarchical ? std::vector<std::int32_t>{} : all_questions(map);

    EpisodeGraph graph(agent, tape, target, warmup);
    int previous = traj.e_before;
    for (std::size_t t = 0; t < options.steps; ++t) {
        StepRecord step;
        std::vector<std::int32_t> candidates;
        if (hierarchical) {
            LearningState s_h = graph.high_state();
            PolicyDecision dh = high_step(tape, agent.high(), s_h, map.num_concepts(), k, options.mode, rng);
            std::vector<ConceptId> concepts;
            for (std::int32_t c : dh.chosen) concepts.emplace_back(c);
            candidates = to_actions(questions_for_concepts(map, concepts));
            step.concepts = std::move(concepts);
            step.log_p_concepts = dh.log_prob;
            if (vars) {
                vars->high_states.push_back(s_h);
                vars->log_p_concepts.push_back(dh.log_prob_var);
            }
        } else {
            candidates = everything;
            if (vars) {
                vars->high_states.push_back({});
                vars->log_p_concepts.push_back({});
            }
        }
        LearningState s_l = graph.low_state(candidates);
        std::vector<QuestionId> cand_ids;
        cand_ids.reserve(candidates.size());
        for (std::int32_t q : candidates) cand_ids.emplace_back(q);
        PolicyDecision dl = low_step(tape, agent.low(), s_l, cand_ids, options.mode, rng);
        ad::Var y_hat = graph.predicted();

        step.candidate_count = candidates.size();
        step.question = QuestionId(dl.chosen.front());
        step.log_p_question = dl.log_prob;
        step.predicted = tape.scalar(y_hat);
        step.correct = session.answer(step.question);
        graph.push({step.question, step.correct});
        step.mastery_after = session.mastery(target);
        if (vars) {
            vars->low_states.push_back(s_l);
            vars->log_p_question.push_back(dl.log_prob_var);
            vars->predicted.push_back(y_hat);
        }
        if (options.reward_mode == RewardMode::telescoping)
            step.reward = static_cast<double>(step.mastery_after - previous) / span;
        previous = step.mastery_after;
        traj.steps.push_back(std::move(step));
    }
    traj.e_after = previous;
    traj.delta = static_cast<double>(traj.e_after - traj.e_before) / span;
    if (options.reward_mode == RewardMode::terminal_only && !traj.steps.empty())
        traj.steps.back().reward = traj.delta;
    return traj;
}

EpisodeVars replay(const Agent& agent, const Trajectory& trajectory, ad::Tape& tape, std::size_t k) {
    (void)k;
    EpisodeVars vars;
    const CurriculumMap& map = agent.curriculum();
    const bool hierarchical = !agent.config().policy.disable_high;
    const auto everything = hierarchical ? std::vector<std::int32_t>{} : all_questions(map);
    EpisodeGraph graph(agent, tape, trajectory.target, trajectory.warmup);
    for (const StepRecord& step : trajectory.steps) {
        std::vector<std::int32_t> candidates;
        if (hierarchical) {
            LearningState s_h = graph.high_state();
            std::vector<std::int32_t> concepts(map.num_concepts());
            std::iota(concepts.begin(), concepts.end(), 0);
            std::vector<std::int32_t> chosen;
            for (ConceptId c : step.concepts) chosen.push_back(c.index);
            PolicyDecision dh = evaluate_choice(
                tape, Level::high, agent.high().score_actions(tape, s_h.vector, concepts), concepts, chosen);
            candidates = to_actions(questions_for_concepts(map, step.concepts));
            vars.high_states.push_back(s_h);
            vars.log_p_concepts.push_back(dh.log_prob_var);
        } else {
            candidates = everything;
            vars.high_states.push_back({});
            vars.log_p_concepts.push_back({});
        }
        LearningState s_l = graph.low_state(candidates);
        PolicyDecision dl = evaluate_choice(tape, Level::low,
                                            agent.low().score_actions(tape, s_l.vector, candidates),
                                            candidates, {step.question.index});
        vars.low_states.push_back(s_l);
        vars.log_p_question.push_back(dl.log_prob_var);
        vars.predicted.push_back(graph.predicted());
        graph.push({step.question, step.correct});
    }
    return vars;
}

std::vector<double> returns(const std::vector<double>& rewards, double gamma) {
    std::vector<double> out(rewards.size());
    double acc = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        acc = rewards[i] + gamma * acc;
        out[i] = acc;
    }
    return out;
}

namespace {

constexpr double kProbClamp = 1e-7;

double bce_value(double y_hat, int y) {
    const double p = std::clamp(y_hat, kProbClamp, 1.0 - kProbClamp);
    return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

void check_weights(const Trajectory& t, const std::vector<double>& w) {
    if (w.size() != t.steps.size()) throw DimensionMismatch("one weight per step required");
}

}  // namespace

double loss_high(const Trajectory& trajectory, const std::vector<double>& weights) {
    check_weights(trajectory, weights);
    double l = 0.0;
    for (std::size_t t = 0; t < weights.size(); ++t)
        if (!trajectory.steps[t].concepts.empty()) l -= weights[t] * trajectory.steps[t].log_p_concepts;
    return l;
}

double loss_low(const Trajectory& trajectory, const std::vector<double>& weights) {
    check_weights(trajectory, weights);
    double l = 0.0;
    for (std::size_t t = 0; t < weights.size(); ++t) l -= weights[t] * trajectory.steps[t].log_p_question;
    return l;
}

double loss_aux(const Trajectory& trajectory) {
    double l = 0.0;
    for (const auto& s : trajectory.steps) l += bce_value(s.predicted, s.correct);
    return l;
}

double loss_total(double loss_high, double loss_low, double loss_aux, double alpha) {
    return loss_high + loss_low + alpha * loss_aux;
}

EpisodeLosses build_losses(ad::Tape& tape, const Trajectory& trajectory, const EpisodeVars& vars,
                           const std::vector<double>& weights, double alpha) {
    check_weights(trajectory, weights);
    std::vector<ad::Var> terms;
    std::vector<double> coeffs;
    EpisodeLosses out;
    for (std::size_t t = 0; t < weights.size(); ++t) {
        if (vars.log_p_concepts[t].valid()) {
            terms.push_back(vars.log_p_concepts[t]);
            coeffs.push_back(-weights[t]);
            out.high -= weights[t] * tape.scalar(vars.log_p_concepts[t]);
        }
        terms.push_back(vars.log_p_question[t]);
        coeffs.push_back(-weights[t]);
        out.low -= weights[t] * tape.scalar(vars.log_p_question[t]);
        ad::Var bce = tape.bce(vars.predicted[t], trajectory.steps[t].correct, kProbClamp);
        terms.push_back(bce);
        coeffs.push_back(alpha);
        out.aux += tape.scalar(bce);
    }
    if (terms.empty()) {
        out.total = tape.scalar_constant(0.0);
    } else {
        out.total = tape.weighted_sum(terms, coeffs);
    }
    out.total_value = loss_total(out.high, out.low, out.aux, alpha);
    return out;
}

Episode sample_episode(const Simulator& sim, std::size_t warmup_len, std::uint64_t seed) {
    for (std::uint64_t attempt = 0; attempt < 1000; ++attempt) {
        Rng rng(derive_seed(seed, "episode", attempt));
        LearningTarget target = sim.sample_targets(rng);
        SessionStart start = sim.reset(target, warmup_len, rng.next_u64());
        if (start.session->initial_mastery() < static_cast<int>(target.size()))
            return {std::move(target), std::move(start)};
    }
    throw AlreadyMastered("could not sample a student with an unmastered target");
}

TrainResult train_run(const TrainConfig& config, const Simulator& sim, Agent& agent,
                      std::uint64_t seed, const CheckpointHook& on_checkpoint) {
    config.validate();
    const std::size_t steps = config.steps ? config.steps : sim.max_steps();
    if (steps > sim.max_steps()) throw ConfigError("training steps exceed the simulator's max_steps");

    TrainResult result;
    result.metrics.reserve(config.episodes);
    Adam adam(agent.params(), AdamConfig{config.learning_rate});
    ad::Gradients grads(agent.params());
    const RolloutOptions options{steps, DecodeMode::sample, config.reward_mode, 0};
    std::size_t next_checkpoint = config.checkpoint_every ? config.checkpoint_every : config.episodes + 1;

    std::size_t done = 0;
    std::size_t last_checkpoint = 0;
    bool saved_any = false;
    while (done < config.episodes) {
        const std::size_t batch = std::min(config.batch_size, config.episodes - done);
        std::vector<std::unique_ptr<ad::Tape>> tapes;
        std::vector<Trajectory> trajs;
        std::vector<EpisodeVars> vars(batch);
        grads.zero();
        for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t index = done + b;
            Episode ep = sample_episode(sim, config.warmup_len, derive_seed(seed, "episode", index));
            Rng rng(derive_seed(seed, "rollout", index));
            tapes.push_back(std::make_unique<ad::Tape>(agent.params(), &grads));
            trajs.push_back(rollout(agent, *ep.start.session, ep.target, ep.start.history, options, rng,
                                    *tapes.back(), &vars[b]));
        }

        std::vector<std::vector<double>> weights;
        for (const auto& t : trajs) weights.push_back(returns(t.rewards(), config.gamma));
        if (config.baseline && batch > 1) {
            for (std::size_t t = 0; t < steps; ++t) {
                double mean = 0.0;
                for (const auto& w : weights) mean += w[t];
                mean /= static_cast<double>(batch);
                for (auto& w : weights) w[t] -= mean;
            }
        }

        for (std::size_t b = 0; b < batch; ++b) {
            EpisodeLosses l = build_losses(*tapes[b], trajs[b], vars[b], weights[b], config.alpha);
            if (!std::isfinite(l.total_value))
                throw DivergenceDetected("non-finite loss at episode " + std::to_string(done + b));
            tapes[b]->backward(l.total);
            result.metrics.push_back({done + b, trajs[b].delta, l.high, l.low, l.aux, l.total_value});
        }
        grads.scale(1.0 / static_cast<double>(batch));
        if (!grads.finite())
            throw DivergenceDetected("non-finite gradient in the batch ending at episode " +
                                     std::to_string(done + batch - 1));
        clip_global_norm(grads, config.max_grad_norm);
        adam.step(agent.params(), grads);
        ++result.updates;
        done += batch;
        if (on_checkpoint && done >= next_checkpoint) {
            on_checkpoint(agent, done);
            last_checkpoint = done;
            saved_any = true;
            next_checkpoint += config.checkpoint_every;
        }
    }
    if (on_checkpoint && !(saved_any && last_checkpoint == done)) on_checkpoint(agent, done);
    return result;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write metrics: " + path.string());
    out << "episode,delta_u,loss_h,loss_l,loss_p,loss_total\n";
    out << std::setprecision(17);
    for (const auto& r : rows)
        out << r.episode << ',' << r.delta << ',' << r.loss_high << ',' << r.loss_low << ','
            << r.loss_aux << ',' << r.loss_total << '\n';
}

}  // namespace hierrec
