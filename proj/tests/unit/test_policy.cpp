#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "hierrec/errors.hpp"
#include "hierrec/policy.hpp"

using namespace hierrec;

namespace {

ad::Var logits_of(ad::Tape& t, std::vector<double> v) {
    return t.constant(Eigen::Map<ad::Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
}

double total(const ActionDistribution& d) { return std::accumulate(d.probs.begin(), d.probs.end(), 0.0); }

}  // namespace

TEST_CASE("decide: support equals the action list and probabilities sum to one") {
    ad::ParamStore ps;
    ad::Tape t(ps, nullptr);
    Rng rng(1);
    const std::vector<std::int32_t> actions{4, 9, 2};
    const auto d = decide(t, Level::low, logits_of(t, {0.3, -1.0, 2.0}), actions, 1, DecodeMode::sample, rng);
    CHECK(d.distribution.support == actions);
    CHECK(total(d.distribution) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.distribution.prob(7) == 0.0);
    CHECK(d.log_prob == doctest::Approx(std::log(d.distribution.prob(d.chosen[0]))));
}

TEST_CASE("greedy ties go to the smallest id") {
    ad::ParamStore ps;
    ad::Tape t(ps, nullptr);
    Rng rng(1);
    const auto d = decide(t, Level::high, logits_of(t, {1.0, 1.0, 1.0, 0.0}), {7, 3, 5, 0}, 2, DecodeMode::greedy, rng);
    CHECK(d.chosen == std::vector<std::int32_t>{3, 5});
}

TEST_CASE("softmax shift invariance and greedy scale invariance") {
    ad::ParamStore ps;
    ad::Tape t(ps, nullptr);
    Rng rng(1);
    const std::vector<std::int32_t> actions{0, 1, 2, 3};
    const std::vector<double> base{0.5, -0.2, 1.7, 0.1};
    const auto a = decide(t, Level::low, logits_of(t, base), actions, 1, DecodeMode::greedy, rng);
    std::vector<double> shifted = base, scaled = base;
    for (double& x : shifted) x += 40.0;
    for (double& x : scaled) x *= 3.0;
    const auto b = decide(t, Level::low, logits_of(t, shifted), actions, 1, DecodeMode::greedy, rng);
    const auto c = decide(t, Level::low, logits_of(t, scaled), actions, 1, DecodeMode::greedy, rng);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a.distribution.probs[i] == doctest::Approx(b.distribution.probs[i]).epsilon(1e-9));
    CHECK(a.chosen == b.chosen);
    CHECK(a.chosen == c.chosen);
}

TEST_CASE("sampling k actions returns distinct ids and matches frequencies") {
    ad::ParamStore ps;
    ad::Tape t(ps, nullptr);
    Rng rng(5);
    std::vector<int> counts(3, 0);
    const int n = 20000;
    const std::vector<double> logits{0.0, std::log(2.0), std::log(5.0)};
    for (int i = 0; i < n; ++i) {
        const auto d = decide(t, Level::low, logits_of(t, logits), {0, 1, 2}, 1, DecodeMode::sample, rng);
        ++counts[d.chosen[0]];
    }
    for (int k = 0; k < 3; ++k) {
        const double p = std::exp(logits[k]) / 8.0;
        CHECK(std::abs(counts[k] - n * p) < 4 * std::sqrt(n * p * (1 - p)));
    }
    for (int i = 0; i < 200; ++i) {
        const auto d = decide(t, Level::high, logits_of(t, {0.1, 0.2, 0.3, 0.4, 0.5}), {0, 1, 2, 3, 4}, 3,
                              DecodeMode::sample, rng);
        REQUIRE(std::set<std::int32_t>(d.chosen.begin(), d.chosen.end()).size() == 3);
    }
}

TEST_CASE("evaluate_choice reproduces the decision's log-probability") {
    ad::ParamStore ps;
    ad::Tape t(ps, nullptr);
    Rng rng(9);
    auto logits = logits_of(t, {0.4, -0.3, 1.1, 0.0});
    const auto d = decide(t, Level::high, logits, {10, 11, 12, 13}, 2, DecodeMode::sample, rng);
    const auto e = evaluate_choice(t, Level::high, logits, {10, 11, 12, 13}, d.chosen);
    CHECK(e.log_prob == doctest::Approx(d.log_prob).epsilon(1e-12));
    CHECK_THROWS_AS(evaluate_choice(t, Level::high, logits, {10, 11, 12, 13}, {99}), ElementNotInSet);
}

TEST_CASE("decision network steps: errors and masking") {
    ad::ParamStore ps;
    Rng rng(2);
    const BackboneConfig bc;
    DecisionNetwork high(ps, "h", bc, 6, 4, rng);
    DecisionNetwork low(ps, "l", bc, 6, 9, rng);
    ad::Tape t(ps, nullptr);
    const LearningState s{Level::high, t.constant(ad::Vector::Random(6))};
    CHECK_THROWS_AS(high_step(t, high, s, 4, 0, DecodeMode::greedy, rng), KTooLarge);
    CHECK_THROWS_AS(high_step(t, high, s, 4, 5, DecodeMode::greedy, rng), KTooLarge);
    CHECK_THROWS_AS(low_step(t, low, s, {}, DecodeMode::greedy, rng), EmptyCandidateSet);
    CHECK_THROWS_AS(low.score_actions(t, s.vector, {9}), OutOfRangeId);

    const std::vector<QuestionId> cands{QuestionId(2), QuestionId(5), QuestionId(8)};
    const auto d = low_step(t, low, s, cands, DecodeMode::sample, rng);
    CHECK(d.distribution.support == std::vector<std::int32_t>{2, 5, 8});
    CHECK(total(d.distribution) == doctest::Approx(1.0));
    const auto flat = flat_step(t, low, s, 9, DecodeMode::greedy, rng);
    CHECK(flat.distribution.support.size() == 9);

    const auto one = low_step(t, low, s, {QuestionId(4)}, DecodeMode::sample, rng);
    CHECK(one.chosen[0] == 4);
    CHECK(one.distribution.probs[0] == 1.0);
}

TEST_CASE("linear backbone has a single transform") {
    ad::ParamStore ps;
    Rng rng(2);
    DecisionNetwork mlp(ps, "a", BackboneConfig{BackboneKind::mlp_pointer, 2}, 6, 3, rng);
    DecisionNetwork lin(ps, "b", BackboneConfig{BackboneKind::linear, 2}, 6, 3, rng);
    CHECK(mlp.backbone_params().size() == 4);
    CHECK(lin.backbone_params().size() == 2);
    CHECK(backbone_kind_from_string("linear") == BackboneKind::linear);
    CHECK_THROWS_AS(backbone_kind_from_string("llm"), ConfigError);
}

TEST_CASE("a full decision pass is bit-stable") {
    ad::ParamStore ps;
    Rng init(4);
    DecisionNetwork net(ps, "n", BackboneConfig{}, 6, 5, init);
    const ad::Vector sv = ad::Vector::Random(6);
    std::vector<double> first;
    for (int run = 0; run < 3; ++run) {
        ad::Tape t(ps, nullptr);
        Rng rng(8);
        const auto d = high_step(t, net, LearningState{Level::high, t.constant(sv)}, 5, 2, DecodeMode::sample, rng);
        if (run == 0) first = d.distribution.probs;
        else CHECK(d.distribution.probs == first);
    }
}
