#include <doctest.h>

#include <cmath>

#include "hierrec/errors.hpp"
#include "hierrec/training.hpp"

using namespace hierrec;

namespace {

ModelConfig mini_model() {
    ModelConfig mc;
    mc.encoder = EncoderConfig{4, 4, 8, 8, 1};
    mc.policy.aux_hidden = 6;
    return mc;
}

std::vector<double> brute_returns(const std::vector<double>& r, double gamma) {
    std::vector<double> out(r.size(), 0.0);
    for (std::size_t t = 0; t < r.size(); ++t)
        for (std::size_t u = t; u < r.size(); ++u) out[t] += std::pow(gamma, static_cast<double>(u - t)) * r[u];
    return out;
}

Trajectory one_step(double log_pc, double log_pq, int y, double y_hat) {
    Trajectory t;
    StepRecord s;
    s.concepts = {ConceptId(0)};
    s.log_p_concepts = log_pc;
    s.log_p_question = log_pq;
    s.correct = y;
    s.predicted = y_hat;
    t.steps.push_back(s);
    return t;
}

}  // namespace

TEST_CASE("returns: worked examples, brute-force oracle and linearity") {
    CHECK(returns({0, 0, 1}, 1.0) == std::vector<double>{1, 1, 1});
    const auto r = returns({1, 1}, 0.5);
    CHECK(r[0] == doctest::Approx(1.5));
    CHECK(r[1] == doctest::Approx(1.0));
    CHECK(returns({0, 0, 0}, 0.9) == std::vector<double>{0, 0, 0});

    Rng rng(6);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(60);
        std::vector<double> a(n), b(n), mix(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.uniform(-1, 1);
            b[i] = rng.uniform(-1, 1);
            mix[i] = 2.0 * a[i] - 0.5 * b[i];
        }
        for (double gamma : {0.0, 0.5, 0.9, 1.0}) {
            const auto got = returns(a, gamma);
            const auto want = brute_returns(a, gamma);
            for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(got[i] - want[i]) <= 1e-12);
            const auto ra = returns(a, gamma), rb = returns(b, gamma), rm = returns(mix, gamma);
            for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(rm[i] - (2.0 * ra[i] - 0.5 * rb[i])) <= 1e-12);
        }
    }
}

TEST_CASE("loss worked examples") {
    CHECK(loss_high(one_step(std::log(0.5), 0.0, 1, 0.5), {1.0}) == doctest::Approx(0.6931471805599453));
    CHECK(loss_low(one_step(0.0, std::log(0.25), 1, 0.5), {2.0}) == doctest::Approx(2.772588722239781));
    CHECK(loss_high(one_step(std::log(0.5), 0.0, 1, 0.5), {0.0}) == 0.0);
    CHECK(loss_aux(one_step(0, 0, 1, 0.5)) == doctest::Approx(0.6931471805599453));
    CHECK(loss_aux(one_step(0, 0, 1, 1.0)) <= 1e-6);
    CHECK(loss_aux(one_step(0, 0, 0, 0.0)) <= 1e-6);
    CHECK(loss_total(1, 2, 3, 1.0) == 6.0);
    CHECK(loss_total(1, 2, 3, 0.0) == 3.0);
    CHECK_THROWS_AS(loss_low(one_step(0, 0, 1, 0.5), {1.0, 2.0}), DimensionMismatch);
}

TEST_CASE("rollout rewards telescope to the learning effect") {
    const auto sim = KssSimulator::reference();
    Agent agent(sim.curriculum(), mini_model(), 3);
    for (int i = 0; i < 100; ++i) {
        Episode ep = sample_episode(sim, 20, derive_seed(5, "ep", i));
        ad::Tape tape(agent.params(), nullptr);
        Rng rng(derive_seed(5, "roll", i));
        const auto traj = rollout(agent, *ep.start.session, ep.target, ep.start.history,
                                  {30, DecodeMode::sample, RewardMode::telescoping, 0}, rng, tape);
        double sum = 0.0;
        for (double r : traj.rewards()) sum += r;
        REQUIRE(std::abs(sum - traj.delta) <= 1e-9);
        REQUIRE(traj.steps.size() == 30);
        REQUIRE(traj.delta >= 0.0);
        REQUIRE(traj.delta <= 1.0);
    }
}

TEST_CASE("terminal-only rewards give constant returns with gamma one") {
    const auto sim = KssSimulator::reference();
    Agent agent(sim.curriculum(), mini_model(), 3);
    Episode ep = sample_episode(sim, 20, 11);
    ad::Tape tape(agent.params(), nullptr);
    Rng rng(1);
    const auto traj = rollout(agent, *ep.start.session, ep.target, ep.start.history,
                              {12, DecodeMode::sample, RewardMode::terminal_only, 0}, rng, tape);
    const auto r = traj.rewards();
    for (std::size_t t = 0; t + 1 < r.size(); ++t) CHECK(r[t] == 0.0);
    CHECK(r.back() == traj.delta);
    for (double g : returns(r, 1.0)) CHECK(g == traj.delta);
}

TEST_CASE("zero-step rollout is empty with zero learning effect") {
    const auto sim = KssSimulator::reference();
    Agent agent(sim.curriculum(), mini_model(), 3);
    Episode ep = sample_episode(sim, 5, 2);
    ad::Tape tape(agent.params(), nullptr);
    Rng rng(1);
    const auto traj = rollout(agent, *ep.start.session, ep.target, ep.start.history,
                              {0, DecodeMode::greedy, RewardMode::telescoping, 0}, rng, tape);
    CHECK(traj.steps.empty());
    CHECK(traj.delta == 0.0);
}

TEST_CASE("low-level candidates follow the chosen concepts") {
    Rng crng(4);
    const auto map = make_synthetic_curriculum(8, 40, 0.3, crng);
    const KssSimulator sim(map, KssSimulator::synthetic_config(map, crng));
    ModelConfig mc = mini_model();
    mc.policy.k = 2;
    Agent agent(map, mc, 1);
    Episode ep = sample_episode(sim, 10, 3);
    ad::Tape tape(agent.params(), nullptr);
    Rng rng(2);
    const auto traj = rollout(agent, *ep.start.session, ep.target, ep.start.history,
                              {20, DecodeMode::sample, RewardMode::telescoping, 0}, rng, tape);
    for (const auto& s : traj.steps) {
        REQUIRE(s.concepts.size() == 2);
        const auto q = questions_for_concepts(map, s.concepts);
        REQUIRE(s.candidate_count == q.size());
        REQUIRE(std::find(q.begin(), q.end(), s.question) != q.end());
    }
}

TEST_CASE("replay rebuilds the same log-probabilities and predictions") {
    const auto sim = KssSimulator::reference();
    Agent agent(sim.curriculum(), mini_model(), 3);
    Episode ep = sample_episode(sim, 20, 8);
    ad::Tape tape(agent.params(), nullptr);
    Rng rng(4);
    const auto traj = rollout(agent, *ep.start.session, ep.target, ep.start.history,
                              {15, DecodeMode::sample, RewardMode::telescoping, 0}, rng, tape);
    ad::Tape tape2(agent.params(), nullptr);
    const auto vars = replay(agent, traj, tape2);
    for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        CHECK(tape2.scalar(vars.log_p_concepts[t]) == doctest::Approx(traj.steps[t].log_p_concepts).epsilon(1e-12));
        CHECK(tape2.scalar(vars.log_p_question[t]) == doctest::Approx(traj.steps[t].log_p_question).epsilon(1e-12));
        CHECK(tape2.scalar(vars.predicted[t]) == doctest::Approx(traj.steps[t].predicted).epsilon(1e-12));
    }
}

TEST_CASE("graph losses equal the value losses") {
    const auto sim = KssSimulator::reference();
    Agent agent(sim.curriculum(), mini_model(), 3);
    Episode ep = sample_episode(sim, 20, 9);
    ad::Gradients g(agent.params());
    ad::Tape tape(agent.params(), &g);
    EpisodeVars vars;
    Rng rng(4);
    const auto traj = rollout(agent, *ep.start.session, ep.target, ep.start.history,
                              {10, DecodeMode::sample, RewardMode::telescoping, 0}, rng, tape, &vars);
    const auto w = returns(traj.rewards(), 0.9);
    const auto l = build_losses(tape, traj, vars, w, 0.7);
    CHECK(l.high == doctest::Approx(loss_high(traj, w)).epsilon(1e-12));
    CHECK(l.low == doctest::Approx(loss_low(traj, w)).epsilon(1e-12));
    CHECK(l.aux == doctest::Approx(loss_aux(traj)).epsilon(1e-12));
    CHECK(tape.scalar(l.total) == doctest::Approx(loss_total(l.high, l.low, l.aux, 0.7)).epsilon(1e-12));
}

TEST_CASE("train_run: zero episodes leave the initialization untouched") {
    const auto sim = KssSimulator::reference();
    Agent agent(sim.curriculum(), mini_model(), 3);
    const auto before = agent.params().hash();
    TrainConfig tc;
    tc.episodes = 0;
    const auto r = train_run(tc, sim, agent, 1);
    CHECK(r.metrics.empty());
    CHECK(agent.params().hash() == before);
}

TEST_CASE("train_run is deterministic and honours a frozen backbone") {
    const auto sim = KssSimulator::reference();
    TrainConfig tc;
    tc.episodes = 24;
    tc.batch_size = 8;
    tc.checkpoint_every = 0;
    Agent a(sim.curriculum(), mini_model(), 3), b(sim.curriculum(), mini_model(), 3);
    const auto ra = train_run(tc, sim, a, 7);
    const auto rb = train_run(tc, sim, b, 7);
    REQUIRE(ra.metrics.size() == 24);
    for (std::size_t i = 0; i < 24; ++i) {
        CHECK(ra.metrics[i].delta == rb.metrics[i].delta);
        CHECK(ra.metrics[i].loss_total == rb.metrics[i].loss_total);
    }
    CHECK(a.params().hash() == b.params().hash());
    CHECK(ra.updates == 3);

    ModelConfig frozen = mini_model();
    frozen.policy.freeze_backbone = true;
    Agent f(sim.curriculum(), frozen, 3);
    const auto backbone = f.backbone_hash();
    const auto all = f.params().hash();
    train_run(tc, sim, f, 7);
    CHECK(f.backbone_hash() == backbone);
    CHECK(f.params().hash() != all);
}

TEST_CASE("train_run stops on a non-finite loss") {
    const auto sim = KssSimulator::reference();
    Agent agent(sim.curriculum(), mini_model(), 3);
    const auto id = *agent.params().find("aux.b2");
    agent.params().value(id)(0, 0) = std::nan("");
    TrainConfig tc;
    tc.episodes = 4;
    tc.batch_size = 2;
    CHECK_THROWS_AS(train_run(tc, sim, agent, 1), DivergenceDetected);
}

TEST_CASE("checkpoint hook fires periodically and at the end") {
    const auto sim = KssSimulator::reference();
    Agent agent(sim.curriculum(), mini_model(), 3);
    TrainConfig tc;
    tc.episodes = 10;
    tc.batch_size = 2;
    tc.checkpoint_every = 4;
    std::vector<std::size_t> seen;
    train_run(tc, sim, agent, 1, [&](const Agent&, std::size_t done) { seen.push_back(done); });
    CHECK(seen == std::vector<std::size_t>{4, 8, 10});
}

TEST_CASE("train config validation") {
    TrainConfig tc;
    tc.learning_rate = 2e-3;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    tc = TrainConfig{};
    tc.gamma = 1.5;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    tc = TrainConfig{};
    tc.alpha = -1;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    for (double lr : kLearningRateGrid) {
        tc = TrainConfig{};
        tc.learning_rate = lr;
        CHECK_NOTHROW(tc.validate());
    }
}
