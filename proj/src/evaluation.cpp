#include "hierrec/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "hierrec/errors.hpp"

namespace hierrec {

double learning_effect(int e_after, int e_before, int e_max) {
    if (e_max < 0 || e_before < 0 || e_after < 0 || e_before > e_max || e_after > e_max)
        throw InvalidArgument("mastery counts must lie in [0, E_max]");
    if (e_before == e_max) throw AlreadyMastered("E_b equals E_max; the learning effect is undefined");
    return static_cast<double>(e_after - e_before) / static_cast<double>(e_max - e_before);
}

Trajectory AgentRecommender::run(SimulatorSession& session, const LearningTarget& target,
                                 const LearningHistory& warmup, std::size_t steps,
                                 std::uint64_t seed) const {
    ad::Tape tape(agent_.params(), nullptr);
    Rng rng(seed);
    const RolloutOptions options{steps, mode_, RewardMode::telescoping, k_};
    return rollout(agent_, session, target, warmup, options, rng, tape);
}

RandomRecommender::RandomRecommender(std::size_t n_questions) : n_questions_(n_questions) {
    if (n_questions == 0) throw EmptyActionSet("random recommender needs at least one question");
}

Trajectory RandomRecommender::run(SimulatorSession& session, const LearningTarget& target,
                                  const LearningHistory& warmup, std::size_t steps,
                                  std::uint64_t seed) const {
    Trajectory traj;
    traj.target = target;
    traj.warmup = warmup;
    traj.e_max = static_cast<int>(target.size());
    traj.e_before = session.mastery(target);
    const double span = static_cast<double>(traj.e_max - traj.e_before);
    if (span <= 0) throw AlreadyMastered("every target is mastered before the first recommendation");
    Rng rng(seed);
    const double p = 1.0 / static_cast<double>(n_questions_);
    int previous = traj.e_before;
    for (std::size_t t = 0; t < steps; ++t) {
        StepRecord step;
        step.candidate_count = n_questions_;
        step.question = QuestionId(static_cast<std::int32_t>(rng.below(n_questions_)));
        step.log_p_question = std::log(p);
        step.correct = session.answer(step.question);
        step.mastery_after = session.mastery(target);
        step.reward = static_cast<double>(step.mastery_after - previous) / span;
        previous = step.mastery_after;
        traj.steps.push_back(std::move(step));
    }
    traj.e_after = previous;
    traj.delta = learning_effect(traj.e_after, traj.e_before, traj.e_max);
    return traj;
}

void EvalProtocol::validate(const Simulator& sim) const {
    if (budgets.empty()) throw ConfigError("evaluation needs at least one step budget");
    for (std::size_t b : budgets)
        if (b > sim.max_steps())
            throw ConfigError("budget " + std::to_string(b) + " exceeds the simulator's max_steps " +
                              std::to_string(sim.max_steps()));
    if (n_students < 1) throw ConfigError("n_students must be >= 1");
    if (seeds.empty()) throw ConfigError("evaluation needs at least one seed");
}

double EvalResult::mean_at(std::size_t budget) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells) {
        if (c.budget != budget) continue;
        for (double x : c.samples) sum += x;
        n += c.samples.size();
    }
    if (n == 0) throw InvalidArgument("no evaluation cells for budget " + std::to_string(budget));
    return sum / static_cast<double>(n);
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

EvalResult evaluate(const Recommender& policy, const Simulator& sim, const EvalProtocol& protocol) {
    protocol.validate(sim);
    EvalResult result;
    result.simulator = sim.kind();
    result.policy = policy.name();
    const std::size_t warmup = protocol.effective_warmup();
    for (std::uint64_t seed : protocol.seeds) {
        const std::uint64_t stream = derive_seed(protocol.base_seed, "eval", seed);
        std::vector<EvalCell> cells(protocol.budgets.size());
        for (std::size_t b = 0; b < cells.size(); ++b) {
            cells[b].budget = protocol.budgets[b];
            cells[b].seed = seed;
            cells[b].samples.reserve(protocol.n_students);
        }
        for (std::size_t i = 0; i < protocol.n_students; ++i) {
            const std::uint64_t student = derive_seed(stream, "student", i);
            for (std::size_t b = 0; b < cells.size(); ++b) {
                Episode ep = sample_episode(sim, warmup, student);
                Trajectory t = policy.run(*ep.start.session, ep.target, ep.start.history,
                                          cells[b].budget, derive_seed(student, "policy", 0));
                cells[b].samples.push_back(t.delta);
            }
        }
        for (auto& c : cells) {
            std::tie(c.mean, c.std) = mean_std(c.samples);
            result.cells.push_back(std::move(c));
        }
    }
    return result;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << std::setprecision(17);
    return out;
}

}  // namespace

void write_results_csv(const std::filesystem::path& path, const EvalResult& result) {
    auto out = open_output(path);
    out << "simulator,budget,seed,n_students,mean_delta,std_delta\n";
    for (const auto& c : result.cells)
        out << result.simulator << ',' << c.budget << ',' << c.seed << ',' << c.samples.size() << ','
            << c.mean << ',' << c.std << '\n';
}

std::string to_string(SweepAxis axis) {
    return axis == SweepAxis::k_concepts ? "k_concepts" : "warmup_len";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "k_concepts") return SweepAxis::k_concepts;
    if (s == "warmup_len") return SweepAxis::warmup_len;
    throw ConfigError("sweep axis must be 'k_concepts' or 'warmup_len', got '" + s + "'");
}

std::vector<SweepRow> sweep(const RecommenderFactory& factory, const Simulator& sim, SweepAxis axis,
                            const std::vector<std::size_t>& values, const EvalProtocol& protocol) {
    if (values.empty()) throw InvalidArgument("sweep axis has no values");
    std::vector<SweepRow> rows;
    for (std::size_t v : values) {
        EvalProtocol p = protocol;
        if (axis == SweepAxis::k_concepts) {
            if (v < 1 || v > 10) throw InvalidArgument("k_concepts values must lie in [1, 10]");
            if (v > sim.curriculum().num_concepts())
                throw KTooLarge("k=" + std::to_string(v) + " exceeds the concept count");
        } else {
            p.coldstart = false;
            p.warmup_len = v;
        }
        auto rec = factory(v);
        rows.push_back({v, evaluate(*rec, sim, p)});
    }
    return rows;
}

void write_sweep_csv(const std::filesystem::path& path, SweepAxis axis, const std::vector<SweepRow>& rows) {
    auto out = open_output(path);
    out << "axis,value,simulator,budget,seed,n_students,mean_delta,std_delta\n";
    for (const auto& row : rows)
        for (const auto& c : row.result.cells)
            out << to_string(axis) << ',' << row.value << ',' << row.result.simulator << ',' << c.budget
                << ',' << c.seed << ',' << c.samples.size() << ',' << c.mean << ',' << c.std << '\n';
}

}  // namespace hierrec
