#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hierrec/errors.hpp"
#include "hierrec/simulators.hpp"

using namespace hierrec;

namespace {

// Independent 3PL formula.
double irt_oracle(double a, double b, double g, double theta) {
    return g + (1.0 - g) / (1.0 + std::exp(-1.7 * a * (theta - b)));
}

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                pairs += 1.0;
                wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
            }
    return wins / pairs;
}

}  // namespace

TEST_CASE("irt_prob matches the three-parameter logistic") {
    CHECK(irt_prob(1.0, 0.0, 0.0, 0.0) == doctest::Approx(0.5));
    CHECK(irt_prob(1.0, 2.0, 0.1, 2.0) == doctest::Approx(0.55));
    for (double theta : {-1.0, 0.0, 0.7, 2.5, 3.0})
        for (double b : {0.0, 1.0, 2.8})
            CHECK(irt_prob(1.3, b, 0.2, theta) == doctest::Approx(irt_oracle(1.3, b, 0.2, theta)).epsilon(1e-12));
}

TEST_CASE("reference KSS: gains depend on prerequisites and are clamped") {
    const auto sim = KssSimulator::reference();
    const auto& cfg = sim.config();
    std::vector<double> theta(10, 0.0);
    // Concept 1 requires concept 0.
    auto s = sim.session_with_abilities(theta, 1);
    s->answer(QuestionId(1));
    CHECK(kss_abilities(*s)[1] == doctest::Approx(cfg.locked_gain));
    theta[0] = cfg.prereq_threshold;
    s = sim.session_with_abilities(theta, 1);
    s->answer(QuestionId(1));
    CHECK(kss_abilities(*s)[1] == doctest::Approx(cfg.mastery_gain));
    // Concept 0 has no prerequisite; repeated practice hits the cap.
    s = sim.session_with_abilities(std::vector<double>(10, 0.0), 1);
    for (int i = 0; i < 5; ++i) s->answer(QuestionId(0));
    CHECK(kss_abilities(*s)[0] == doctest::Approx(cfg.ability_cap));
}

TEST_CASE("KSS abilities never decrease and mastery is monotone") {
    const auto sim = KssSimulator::reference();
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto target = sim.sample_targets(rng);
        auto start = sim.reset(target, 5, rng.next_u64());
        auto prev = kss_abilities(*start.session);
        int prev_m = start.session->mastery(target);
        CHECK(prev_m == start.session->initial_mastery());
        for (std::size_t t = 0; t < sim.max_steps(); ++t) {
            start.session->answer(QuestionId(static_cast<std::int32_t>(rng.below(10))));
            const auto now = kss_abilities(*start.session);
            for (std::size_t c = 0; c < now.size(); ++c) REQUIRE(now[c] >= prev[c]);
            const int m = start.session->mastery(target);
            REQUIRE(m >= prev_m);
            prev = now;
            prev_m = m;
        }
        CHECK_THROWS_AS(start.session->answer(QuestionId(0)), StepLimitExceeded);
    }
}

TEST_CASE("mastery counts targets with probability at least one half") {
    const auto sim = KssSimulator::reference();
    std::vector<double> theta(10, 0.0);
    theta[0] = 3.0;
    theta[1] = 3.0;
    auto s = sim.session_with_abilities(theta, 0);
    const LearningTarget t({QuestionId(0), QuestionId(1), QuestionId(2)});
    int oracle = 0;
    for (QuestionId q : t.questions()) oracle += s->correct_prob(q) >= 0.5;
    CHECK(s->mastery(t) == oracle);
    CHECK(s->mastery(t) == 2);
}

TEST_CASE("KSS sessions replay deterministically from (seed, actions)") {
    const auto sim = KssSimulator::reference();
    const LearningTarget target({QuestionId(3), QuestionId(5), QuestionId(9)});
    auto a = sim.reset(target, 20, 77);
    auto b = sim.reset(target, 20, 77);
    CHECK(a.history == b.history);
    for (int q : {0, 1, 1, 2, 3, 3, 4, 5, 6, 9}) {
        CHECK(a.session->answer(QuestionId(q)) == b.session->answer(QuestionId(q)));
        CHECK(a.session->mastery(target) == b.session->mastery(target));
    }
}

TEST_CASE("KSS config validation") {
    auto cfg = KssConfig::reference();
    cfg.prerequisite_edges.emplace_back(9, 0);  // closes a cycle
    CHECK_THROWS_AS(KssSimulator(CurriculumMap::one_to_one(10), cfg), ConfigError);
    cfg = KssConfig::reference();
    cfg.n_items = 9;
    CHECK_THROWS_AS(KssSimulator(CurriculumMap::one_to_one(10), cfg), ConfigError);
    cfg = KssConfig::reference();
    cfg.locked_gain = 2.0;
    CHECK_THROWS_AS(KssSimulator(CurriculumMap::one_to_one(10), cfg), ConfigError);
}

TEST_CASE("threshold answer mode is deterministic in the ability") {
    auto cfg = KssConfig::reference();
    cfg.answer_mode = AnswerMode::threshold;
    const KssSimulator sim(CurriculumMap::one_to_one(10), cfg);
    std::vector<double> theta(10, 3.0);
    theta[9] = 0.0;
    auto s = sim.session_with_abilities(theta, 3);
    CHECK(s->answer(QuestionId(0)) == 1);
    CHECK(s->answer(QuestionId(9)) == 0);
}

TEST_CASE("synthetic KSS config is acyclic and sized to the curriculum") {
    Rng rng(12);
    const auto map = make_synthetic_curriculum(30, 200, 0.2, rng);
    const auto cfg = KssSimulator::synthetic_config(map, rng);
    CHECK(cfg.difficulty.size() == 200);
    CHECK_NOTHROW(KssSimulator(map, cfg));
}

TEST_CASE("roc_auc agrees with the pairwise oracle, ties included") {
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s;
        std::vector<int> y;
        for (int i = 0; i < 60; ++i) {
            s.push_back(std::round(rng.uniform() * 8) / 8);  // many ties
            y.push_back(rng.bernoulli(0.4));
        }
        if (std::count(y.begin(), y.end(), 1) == 0 || std::count(y.begin(), y.end(), 0) == 0) continue;
        REQUIRE(roc_auc(s, y).value() == doctest::Approx(brute_auc(s, y)).epsilon(1e-12));
    }
    CHECK_FALSE(roc_auc({0.1, 0.9}, {1, 1}).has_value());
}

TEST_CASE("DKT training learns an easy pattern and reports a held-out AUC") {
    // Question 0 is always right, question 1 always wrong.
    Rng rng(1);
    std::vector<LearningHistory> histories;
    for (int s = 0; s < 120; ++s) {
        LearningHistory h;
        for (int t = 0; t < 12; ++t) {
            const int q = static_cast<int>(rng.below(2));
            h.push_back({QuestionId(q), q == 0 ? 1 : 0});
        }
        histories.push_back(h);
    }
    DktTrainConfig cfg;
    cfg.hidden_dim = 8;
    cfg.embed_dim = 8;
    cfg.epochs = 15;
    const auto result = dkt_train(histories, 2, cfg);
    REQUIRE(result.report.heldout_auc.has_value());
    CHECK(*result.report.heldout_auc > 0.95);
    CHECK(result.report.epoch_loss.back() < result.report.epoch_loss.front());
    CHECK(result.model.predict(LearningHistory{}, QuestionId(0)) > 0.5);
}

TEST_CASE("DKT training input errors") {
    DktTrainConfig cfg;
    CHECK_THROWS_AS(dkt_train({LearningHistory{}}, 3, cfg), InsufficientData);
    CHECK_THROWS_AS(dkt_train({LearningHistory{{QuestionId(5), 1}, {QuestionId(0), 0}}}, 3, cfg), OutOfRangeId);
}

TEST_CASE("KT model save/load round trip and simulator wiring") {
    Rng rng(2);
    KtModel model(6, 4, 5, rng);
    const auto path = std::filesystem::temp_directory_path() / "hierrec_kt_roundtrip.ckpt";
    model.save(path);
    const KtModel back = KtModel::load(path);
    const LearningHistory h{{QuestionId(1), 1}, {QuestionId(3), 0}};
    for (int q = 0; q < 6; ++q)
        CHECK(back.predict(h, QuestionId(q)) == model.predict(h, QuestionId(q)));
    std::filesystem::remove(path);

    KtSimConfig sc;
    sc.hidden_dim = 5;
    sc.n_targets = 3;
    sc.max_steps = 4;
    const KtSimulator sim(CurriculumMap::one_to_one(6), std::make_shared<const KtModel>(model), sc);
    auto start = sim.reset(sim.sample_targets(rng), 3, 9);
    CHECK(start.history.size() == 3);
    for (int i = 0; i < 4; ++i) start.session->answer(QuestionId(i));
    CHECK_THROWS_AS(start.session->answer(QuestionId(0)), StepLimitExceeded);

    sc.hidden_dim = 7;
    CHECK_THROWS_AS(KtSimulator(CurriculumMap::one_to_one(6), std::make_shared<const KtModel>(model), sc),
                    ConfigError);
}
