#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hierrec/training.hpp"

namespace hierrec {

/// (E_a - E_b) / (E_max - E_b). Throws AlreadyMastered when E_b == E_max and
/// InvalidArgument when a count lies outside [0, E_max].
double learning_effect(int e_after, int e_before, int e_max);

/// Anything that can drive a session for a number of steps.
class Recommender {
public:
    virtual ~Recommender() = default;
    virtual std::string name() const = 0;
    /// Runs `steps` recommendations and returns the trajectory (rewards in
    /// telescoping form). `seed` feeds any randomness of the recommender.
    virtual Trajectory run(SimulatorSession& session, const LearningTarget& target,
                           const LearningHistory& warmup, std::size_t steps,
                           std::uint64_t seed) const = 0;
};

class AgentRecommender final : public Recommender {
public:
    /// `k` overrides the agent's concept count when non-zero.
    explicit AgentRecommender(const Agent& agent, DecodeMode mode = DecodeMode::greedy,
                              std::size_t k = 0)
        : agent_(agent), mode_(mode), k_(k) {}

    std::string name() const override { return "hierrec"; }
    Trajectory run(SimulatorSession& session, const LearningTarget& target,
                   const LearningHistory& warmup, std::size_t steps,
                   std::uint64_t seed) const override;

private:
    const Agent& agent_;
    DecodeMode mode_;
    std::size_t k_;
};

/// Uniform choice over every question at each step.
class RandomRecommender final : public Recommender {
public:
    explicit RandomRecommender(std::size_t n_questions);

    std::string name() const override { return "random"; }
    Trajectory run(SimulatorSession& session, const LearningTarget& target,
                   const LearningHistory& warmup, std::size_t steps,
                   std::uint64_t seed) const override;

private:
    std::size_t n_questions_;
};

struct EvalProtocol {
    std::vector<std::size_t> budgets{10, 30};
    std::size_t n_students = 500;
    bool coldstart = false;
    std::size_t warmup_len = 20;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    /// Global seed the per-seed "eval" streams derive from.
    std::uint64_t base_seed = 0;

    std::size_t effective_warmup() const noexcept { return coldstart ? 0 : warmup_len; }
    /// Throws ConfigError.
    void validate(const Simulator& sim) const;
};

struct EvalCell {
    std::size_t budget = 0;
    std::uint64_t seed = 0;
    std::vector<double> samples;  // one Δ_u per student
    double mean = 0.0;
    double std = 0.0;  // population standard deviation over students
};

struct EvalResult {
    std::string simulator;
    std::string policy;
    std::vector<EvalCell> cells;  // seed-major, budgets in protocol order

    /// Mean over every student of every seed at `budget`. Throws InvalidArgument.
    double mean_at(std::size_t budget) const;
};

/// Mean and population standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& xs);

/// Student i of seed s is identical for every budget and every recommender.
EvalResult evaluate(const Recommender& policy, const Simulator& sim, const EvalProtocol& protocol);

/// Header: simulator,budget,seed,n_students,mean_delta,std_delta
void write_results_csv(const std::filesystem::path& path, const EvalResult& result);

enum class SweepAxis { k_concepts, warmup_len };
std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& s);

struct SweepRow {
    std::size_t value = 0;
    EvalResult result;
};

/// Builds the recommender for one axis value. For the warmup axis the
/// protocol's warmup length is overridden instead.
using RecommenderFactory = std::function<std::unique_ptr<Recommender>(std::size_t axis_value)>;

/// One evaluation per axis value. Throws InvalidArgument for an empty axis
/// or a k value outside [1, 10].
std::vector<SweepRow> sweep(const RecommenderFactory& factory, const Simulator& sim, SweepAxis axis,
                            const std::vector<std::size_t>& values, const EvalProtocol& protocol);

/// Header: axis,value,simulator,budget,seed,n_students,mean_delta,std_delta
void write_sweep_csv(const std::filesystem::path& path, SweepAxis axis,
                     const std::vector<SweepRow>& rows);

}  // namespace hierrec
