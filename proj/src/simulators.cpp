#include "hierrec/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hierrec/checkpoint_io.hpp"
#include "hierrec/errors.hpp"
#include "hierrec/optim.hpp"

namespace hierrec {

double irt_prob(double discrimination, double difficulty, double guess, double ability) {
    const double z = 1.7 * discrimination * (ability - difficulty);
    return guess + (1.0 - guess) / (1.0 + std::exp(-z));
}

std::string to_string(AnswerMode mode) {
    return mode == AnswerMode::sample ? "sample" : "threshold";
}

AnswerMode answer_mode_from_string(const std::string& s) {
    if (s == "sample") return AnswerMode::sample;
    if (s == "threshold") return AnswerMode::threshold;
    throw ConfigError("answer_mode must be 'sample' or 'threshold', got '" + s + "'");
}

int SimulatorSession::respond(QuestionId q) {
    const double p = correct_prob(q);
    return mode_ == AnswerMode::sample ? static_cast<int>(rng_.bernoulli(p)) : static_cast<int>(p >= 0.5);
}

int SimulatorSession::answer(QuestionId q) {
    if (steps_ >= max_steps_)
        throw StepLimitExceeded("session already answered " + std::to_string(max_steps_) +
                                " questions");
    const int y = respond(q);
    advance(q, y);
    ++steps_;
    return y;
}

int SimulatorSession::mastery(const LearningTarget& targets) const {
    int count = 0;
    for (QuestionId q : targets.questions()) count += correct_prob(q) >= 0.5 ? 1 : 0;
    return count;
}

// ---------------------------------------------------------------------------

KssConfig KssConfig::reference() {
    KssConfig c;
    c.n_items = 10;
    c.prerequisite_edges = {{0, 1}, {1, 2}, {1, 3}, {2, 4}, {3, 5}, {4, 5},
                            {5, 6}, {5, 7}, {6, 8}, {7, 8}, {8, 9}};
    c.difficulty = {1.0, 1.5, 2.0, 2.0, 2.5, 2.5, 2.5, 2.8, 2.8, 2.8};
    return c;
}

class KssSimulator::Session final : public SimulatorSession {
public:
    Session(const KssSimulator& sim, std::vector<double> abilities, std::uint64_t seed)
        : SimulatorSession(seed, sim.config_.answer_mode, sim.config_.max_steps),
          sim_(sim),
          theta_(std::move(abilities)) {}

    Session(const KssSimulator& sim, std::uint64_t seed)
        : SimulatorSession(seed, sim.config_.answer_mode, sim.config_.max_steps), sim_(sim) {
        theta_.resize(sim.curriculum_.num_concepts());
        for (double& t : theta_) t = rng_.uniform(0.0, sim.config_.init_ability_max);
    }

    double correct_prob(QuestionId q) const override {
        const auto& cs = sim_.curriculum_.concepts_of(q);
        double ability = 0.0;
        for (ConceptId c : cs) ability += theta_[c.idx()];
        ability /= static_cast<double>(cs.size());
        const auto& cfg = sim_.config_;
        const double b = cfg.difficulty.empty() ? 0.0 : cfg.difficulty[q.idx()];
        return irt_prob(cfg.discrimination, b, cfg.guess, ability);
    }

    const std::vector<double>& abilities() const noexcept { return theta_; }

    Rng& rng() { return rng_; }
    void set_initial_mastery(int e) { initial_mastery_ = e; }

protected:
    void advance(QuestionId q, int /*correct*/) override {
        const auto& cfg = sim_.config_;
        const auto& cs = sim_.curriculum_.concepts_of(q);
        std::vector<double> gains;
        gains.reserve(cs.size());
        for (ConceptId c : cs) {
            const auto& pre = sim_.prerequisites_[c.idx()];
            const bool unlocked = std::all_of(pre.begin(), pre.end(), [&](std::int32_t p) {
                return theta_[static_cast<std::size_t>(p)] >= cfg.prereq_threshold;
            });
            gains.push_back(unlocked ? cfg.mastery_gain : cfg.locked_gain);
        }
        for (std::size_t i = 0; i < cs.size(); ++i) {
            double& t = theta_[cs[i].idx()];
            t = std::clamp(t + gains[i], 0.0, cfg.ability_cap);
        }
    }

private:
    friend class KssSimulator;
    const KssSimulator& sim_;
    std::vector<double> theta_;
};

KssSimulator::KssSimulator(CurriculumMap curriculum, KssConfig config)
    : curriculum_(std::move(curriculum)), config_(std::move(config)) {
    const std::size_t m = curriculum_.num_concepts();
    if (config_.n_items != curriculum_.num_questions())
        throw ConfigError("kss n_items (" + std::to_string(config_.n_items) +
                          ") must equal the curriculum question count (" +
                          std::to_string(curriculum_.num_questions()) + ")");
    if (!config_.difficulty.empty() && config_.difficulty.size() != config_.n_items)
        throw ConfigError("kss difficulty needs one value per question");
    if (!(config_.guess >= 0.0 && config_.guess < 1.0)) throw ConfigError("kss guess must be in [0, 1)");
    if (!(config_.discrimination > 0.0)) throw ConfigError("kss discrimination must be positive");
    if (!(config_.mastery_gain > config_.locked_gain && config_.locked_gain > 0.0))
        throw ConfigError("kss gains must satisfy mastery_gain > locked_gain > 0");
    if (!(config_.ability_cap > 0.0)) throw ConfigError("kss ability_cap must be positive");
    if (config_.init_ability_max < 0.0 || config_.init_ability_max > config_.ability_cap)
        throw ConfigError("kss init_ability_max must be in [0, ability_cap]");
    if (config_.max_steps < 1) throw ConfigError("kss max_steps must be >= 1");
    if (config_.target_min < 1 || config_.target_min > config_.target_max)
        throw ConfigError("kss target sizes must satisfy 1 <= target_min <= target_max");

    prerequisites_.assign(m, {});
    std::vector<std::vector<std::int32_t>> children(m);
    std::vector<int> indegree(m, 0);
    for (auto [p, c] : config_.prerequisite_edges) {
        if (p < 0 || c < 0 || static_cast<std::size_t>(p) >= m || static_cast<std::size_t>(c) >= m)
            throw ConfigError("prerequisite edge references an unknown concept");
        if (p == c) throw ConfigError("prerequisite graph has a self loop");
        prerequisites_[static_cast<std::size_t>(c)].push_back(p);
        children[static_cast<std::size_t>(p)].push_back(c);
        ++indegree[static_cast<std::size_t>(c)];
    }
    // Kahn's algorithm: every node must be popped for the graph to be acyclic.
    std::vector<std::size_t> queue;
    for (std::size_t i = 0; i < m; ++i)
        if (indegree[i] == 0) queue.push_back(i);
    std::size_t seen = 0;
    while (!queue.empty()) {
        const std::size_t u = queue.back();
        queue.pop_back();
        ++seen;
        for (std::int32_t v : children[u])
            if (--indegree[static_cast<std::size_t>(v)] == 0) queue.push_back(static_cast<std::size_t>(v));
    }
    if (seen != m) throw ConfigError("prerequisite graph is not acyclic");
}

KssSimulator KssSimulator::reference() {
    return KssSimulator(CurriculumMap::one_to_one(10), KssConfig::reference());
}

KssConfig KssSimulator::synthetic_config(const CurriculumMap& curriculum, Rng& rng) {
    const std::size_t m = curriculum.num_concepts();
    KssConfig cfg;
    cfg.n_items = curriculum.num_questions();
    std::vector<int> depth(m, 0);
    for (std::size_t c = 1; c < m; ++c) {
        const std::size_t n_pre = std::min<std::size_t>(c, 1 + rng.below(2));
        const std::size_t window = std::min<std::size_t>(c, 6);
        for (std::size_t idx : rng.choose(window, n_pre)) {
            const std::size_t p = c - 1 - idx;
            cfg.prerequisite_edges.emplace_back(static_cast<std::int32_t>(p),
                                                static_cast<std::int32_t>(c));
            depth[c] = std::max(depth[c], depth[p] + 1);
        }
    }
    const int max_depth = std::max(1, *std::max_element(depth.begin(), depth.end()));
    cfg.difficulty.resize(cfg.n_items);
    for (std::size_t q = 0; q < cfg.n_items; ++q) {
        int d = 0;
        for (ConceptId c : curriculum.concepts_of(QuestionId(q))) d = std::max(d, depth[c.idx()]);
        const double b = 1.0 + 1.8 * static_cast<double>(d) / max_depth + rng.uniform(-0.2, 0.2);
        cfg.difficulty[q] = std::clamp(b, 0.0, cfg.ability_cap - 0.2);
    }
    cfg.target_min = std::min<std::size_t>(cfg.n_items, 5);
    cfg.target_max = std::min<std::size_t>(cfg.n_items, 20);
    return cfg;
}

LearningTarget KssSimulator::sample_targets(Rng& rng) const {
    const std::size_t n = curriculum_.num_questions();
    const std::size_t lo = std::min(config_.target_min, n);
    const std::size_t hi = std::min(config_.target_max, n);
    const std::size_t size = lo + rng.below(hi - lo + 1);
    std::vector<QuestionId> qs;
    for (std::size_t i : rng.choose(n, size)) qs.emplace_back(i);
    return LearningTarget(std::move(qs));
}

SessionStart KssSimulator::reset(const LearningTarget& targets, std::size_t warmup_len,
                                 std::uint64_t seed) const {
    auto session = std::make_unique<Session>(*this, seed);
    SessionStart start;
    start.history.reserve(warmup_len);
    const std::size_t n = curriculum_.num_questions();
    for (std::size_t i = 0; i < warmup_len; ++i) {
        const QuestionId q(session->rng().below(n));
        const int y = session->respond(q);
        session->advance(q, y);
        start.history.push_back({q, y});
    }
    session->set_initial_mastery(session->mastery(targets));
    start.session = std::move(session);
    return start;
}

std::unique_ptr<SimulatorSession> KssSimulator::session_with_abilities(std::vector<double> abilities,
                                                                       std::uint64_t seed) const {
    if (abilities.size() != curriculum_.num_concepts())
        throw DimensionMismatch("one ability per concept required");
    for (double& a : abilities) a = std::clamp(a, 0.0, config_.ability_cap);
    return std::make_unique<Session>(*this, std::move(abilities), seed);
}

std::vector<double> kss_abilities(const SimulatorSession& session) {
    if (const auto* s = dynamic_cast<const KssSimulator::Session*>(&session)) return s->abilities();
    return {};
}

// ---------------------------------------------------------------------------

KtModel::KtModel(std::size_t n_questions, std::size_t embed_dim, std::size_t hidden_dim, Rng& rng)
    : n_questions_(n_questions), embed_dim_(embed_dim), hidden_dim_(hidden_dim) {
    if (n_questions == 0 || embed_dim == 0 || hidden_dim == 0)
        throw InvalidArgument("KtModel dimensions must be positive");
    define(rng);
}

void KtModel::define(Rng& rng) {
    const auto n = static_cast<Eigen::Index>(n_questions_);
    const auto e = static_cast<Eigen::Index>(embed_dim_);
    const auto h = static_cast<Eigen::Index>(hidden_dim_);
    // One-hot input over 2n (question x correctness), so the embedding fan-in is 1.
    embed_ = params_.add_uniform("kt.embed", e, 2 * n, 1, rng);
    lstm_w_ = params_.add_uniform("kt.lstm.w", 4 * h, e + h, e + h, rng);
    lstm_b_ = params_.add_uniform("kt.lstm.b", 4 * h, 1, e + h, rng);
    out_w_ = params_.add_uniform("kt.out.w", h, n, h, rng);
    out_b_ = params_.add_zeros("kt.out.b", 1, n);
}

KtModel::State KtModel::initial_state() const {
    return {ad::Vector::Zero(static_cast<Eigen::Index>(hidden_dim_)),
            ad::Vector::Zero(static_cast<Eigen::Index>(hidden_dim_))};
}

KtModel::State KtModel::step(const State& s, InteractionRecord record) const {
    if (record.question.idx() >= n_questions_) throw OutOfRangeId("question outside KT model range");
    const auto col = static_cast<Eigen::Index>(record.question.idx() +
                                               (record.correct ? n_questions_ : 0));
    const ad::Vector x = params_.value(embed_).col(col);
    auto [h, c] = ad::lstm_cell(params_.value(lstm_w_), params_.value(lstm_b_), x, s.h, s.c);
    return {std::move(h), std::move(c)};
}

double KtModel::predict(const State& s, QuestionId q) const {
    if (q.index < 0 || q.idx() >= n_questions_) throw OutOfRangeId("question outside KT model range");
    const auto j = static_cast<Eigen::Index>(q.idx());
    const double logit = params_.value(out_w_).col(j).dot(s.h) + params_.value(out_b_)(0, j);
    return 1.0 / (1.0 + std::exp(-logit));
}

double KtModel::predict(const LearningHistory& history, QuestionId q) const {
    State s = initial_state();
    for (const auto& r : history) s = step(s, r);
    return predict(s, q);
}

ad::Var KtModel::sequence_loss(ad::Tape& tape, const LearningHistory& history,
                               std::vector<double>* predictions) const {
    const auto hd = static_cast<Eigen::Index>(hidden_dim_);
    ad::Var embed = tape.param(embed_);
    ad::Var w = tape.param(lstm_w_);
    ad::Var b = tape.param(lstm_b_);
    ad::Var ow = tape.param(out_w_);
    ad::Var ob = tape.param(out_b_);
    ad::Var h = tape.constant(ad::Matrix::Zero(hd, 1));
    ad::Var c = tape.constant(ad::Matrix::Zero(hd, 1));
    std::vector<ad::Var> losses;
    losses.reserve(history.size());
    for (const auto& r : history) {
        const auto q = static_cast<Eigen::Index>(r.question.idx());
        ad::Var logit = tape.add(tape.matmul_tn(tape.gather_cols(ow, {q}), h), tape.gather_cols(ob, {q}));
        ad::Var p = tape.sigmoid(logit);
        if (predictions) predictions->push_back(tape.scalar(p));
        losses.push_back(tape.bce(p, static_cast<double>(r.correct)));
        const Eigen::Index in = q + (r.correct ? static_cast<Eigen::Index>(n_questions_) : 0);
        std::tie(h, c) = ad::lstm_cell(tape, w, b, tape.gather_cols(embed, {in}), h, c);
    }
    return tape.weighted_sum(losses, std::vector<double>(losses.size(), 1.0));
}

void KtModel::save(const std::filesystem::path& path) const {
    nlohmann::json meta = {{"n_questions", n_questions_},
                           {"embed_dim", embed_dim_},
                           {"hidden_dim", hidden_dim_}};
    write_checkpoint(path, kSchema, meta, params_);
}

KtModel KtModel::load(const std::filesystem::path& path) {
    CheckpointReader reader(path, kSchema);
    KtModel model;
    try {
        model.n_questions_ = reader.meta().at("n_questions").get<std::size_t>();
        model.embed_dim_ = reader.meta().at("embed_dim").get<std::size_t>();
        model.hidden_dim_ = reader.meta().at("hidden_dim").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointMismatch(path.string() + ": " + e.what());
    }
    Rng unused(0);
    model.define(unused);
    reader.read_params(model.params_);
    return model;
}

std::optional<double> roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DimensionMismatch("roc_auc: size mismatch");
    std::size_t pos = 0;
    for (int y : labels) pos += y ? 1 : 0;
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) return std::nullopt;
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]]) rank_sum += avg_rank;
        i = j + 1;
    }
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

DktTrainResult dkt_train(const std::vector<LearningHistory>& histories, std::size_t n_questions,
                         const DktTrainConfig& config) {
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < histories.size(); ++i)
        if (!histories[i].empty()) usable.push_back(i);
    if (usable.empty()) throw InsufficientData("no non-empty learning history to train on");
    for (std::size_t i : usable)
        for (const auto& r : histories[i])
            if (r.question.index < 0 || r.question.idx() >= n_questions)
                throw OutOfRangeId("history references question " + std::to_string(r.question.index));

    Rng rng(config.seed);
    Rng init_rng(derive_seed(config.seed, "init"));
    DktTrainResult result{KtModel(n_questions, config.embed_dim, config.hidden_dim, init_rng), {}};
    KtModel& model = result.model;

    // Hold out a fraction of sessions, keeping at least one for training.
    std::vector<std::size_t> order = usable;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::size_t n_heldout = static_cast<std::size_t>(config.heldout_fraction * static_cast<double>(order.size()));
    n_heldout = std::min(n_heldout, order.size() - 1);
    std::vector<std::size_t> heldout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_heldout));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_heldout), order.end());
    result.report.train_sessions = train.size();
    result.report.heldout_sessions = heldout.size();

    Adam adam(model.params(), AdamConfig{config.learning_rate});
    ad::Gradients grads(model.params());
    const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng.below(i)]);
        double epoch_loss = 0.0;
        std::size_t epoch_count = 0;
        for (std::size_t start = 0; start < train.size(); start += batch) {
            grads.zero();
            std::size_t count = 0;
            const std::size_t end = std::min(train.size(), start + batch);
            for (std::size_t k = start; k < end; ++k) {
                const auto& h = histories[train[k]];
                ad::Tape tape(model.params(), &grads);
                ad::Var loss = model.sequence_loss(tape, h);
                epoch_loss += tape.scalar(loss);
                count += h.size();
                tape.backward(loss);
            }
            epoch_count += count;
            grads.scale(1.0 / static_cast<double>(count));
            clip_global_norm(grads, config.max_grad_norm);
            adam.step(model.params(), grads);
        }
        result.report.epoch_loss.push_back(epoch_loss / static_cast<double>(epoch_count));
    }

    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i : heldout) {
        KtModel::State s = model.initial_state();
        for (const auto& r : histories[i]) {
            scores.push_back(model.predict(s, r.question));
            labels.push_back(r.correct);
            s = model.step(s, r);
        }
    }
    result.report.heldout_auc = roc_auc(scores, labels);
    return result;
}

// ---------------------------------------------------------------------------

class KtSimulator::Session final : public SimulatorSession {
public:
    Session(const KtSimulator& sim, std::uint64_t seed)
        : SimulatorSession(seed, sim.config_.answer_mode, sim.config_.max_steps),
          model_(*sim.model_),
          state_(model_.initial_state()) {}

    double correct_prob(QuestionId q) const override { return model_.predict(state_, q); }

    Rng& rng() { return rng_; }
    void set_initial_mastery(int e) { initial_mastery_ = e; }

protected:
    void advance(QuestionId q, int correct) override { state_ = model_.step(state_, {q, correct}); }

private:
    friend class KtSimulator;
    const KtModel& model_;
    KtModel::State state_;
};

KtSimulator::KtSimulator(CurriculumMap curriculum, std::shared_ptr<const KtModel> model,
                         KtSimConfig config)
    : curriculum_(std::move(curriculum)), model_(std::move(model)), config_(config) {
    if (!model_) throw ConfigError("kt simulator needs a trained model");
    if (model_->num_questions() != curriculum_.num_questions())
        throw ConfigError("kt model question count does not match the curriculum");
    if (model_->hidden_dim() != config_.hidden_dim)
        throw ConfigError("kt model hidden_dim does not match the simulator config");
    if (config_.max_steps < 1) throw ConfigError("kt max_steps must be >= 1");
    if (config_.n_targets < 1) throw ConfigError("kt n_targets must be >= 1");
}

LearningTarget KtSimulator::sample_targets(Rng& rng) const {
    const std::size_t n = curriculum_.num_questions();
    std::vector<QuestionId> qs;
    for (std::size_t i : rng.choose(n, std::min(config_.n_targets, n))) qs.emplace_back(i);
    return LearningTarget(std::move(qs));
}

SessionStart KtSimulator::reset(const LearningTarget& targets, std::size_t warmup_len,
                                std::uint64_t seed) const {
    auto session = std::make_unique<Session>(*this, seed);
    SessionStart start;
    start.history.reserve(warmup_len);
    const std::size_t n = curriculum_.num_questions();
    for (std::size_t i = 0; i < warmup_len; ++i) {
        const QuestionId q(session->rng().below(n));
        const int y = session->respond(q);
        session->advance(q, y);
        start.history.push_back({q, y});
    }
    session->set_initial_mastery(session->mastery(targets));
    start.session = std::move(session);
    return start;
}

}  // namespace hierrec
