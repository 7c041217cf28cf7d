#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "hierrec/curriculum.hpp"
#include "hierrec/errors.hpp"
#include "hierrec/rng.hpp"

using namespace hierrec;

namespace {

CurriculumMap small_map() {
    // 3 concepts, 5 questions; question 4 is shared by concepts 1 and 2.
    return CurriculumMap::build(3, 5,
                                {{QuestionId(0), ConceptId(0)},
                                 {QuestionId(1), ConceptId(0)},
                                 {QuestionId(2), ConceptId(1)},
                                 {QuestionId(3), ConceptId(2)},
                                 {QuestionId(4), ConceptId(1)},
                                 {QuestionId(4), ConceptId(2)}});
}

}  // namespace

TEST_CASE("build rejects out-of-range ids, orphans and empty input") {
    CHECK_THROWS_AS(CurriculumMap::build(2, 2, {{QuestionId(0), ConceptId(2)}, {QuestionId(1), ConceptId(0)}}),
                    OutOfRangeId);
    CHECK_THROWS_AS(CurriculumMap::build(2, 2, {{QuestionId(2), ConceptId(0)}}), OutOfRangeId);
    CHECK_THROWS_AS(CurriculumMap::build(2, 2, {{QuestionId(0), ConceptId(0)}}), OrphanQuestion);
    CHECK_THROWS_AS(CurriculumMap::build(2, 2, {}), InvalidArgument);
}

TEST_CASE("edge extraction round-trips the input edge set") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto map = make_synthetic_curriculum(7, 40, 0.4, rng);
        std::vector<Edge> edges = map.edges();
        const auto rebuilt = CurriculumMap::build(7, 40, edges);
        CHECK(rebuilt.edges() == edges);
        CHECK(rebuilt.digest() == map.digest());
    }
}

TEST_CASE("questions_for_concepts equals a brute-force union") {
    Rng rng(8);
    const auto map = make_synthetic_curriculum(12, 90, 0.3, rng);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = 1 + rng.below(4);
        std::vector<ConceptId> cs;
        for (auto i : rng.choose(12, k)) cs.emplace_back(i);
        std::set<int> oracle;
        for (const Edge& e : map.edges())
            for (ConceptId c : cs)
                if (e.concept_id == c) oracle.insert(e.question.index);
        const auto got = questions_for_concepts(map, cs);
        std::vector<int> ids;
        for (QuestionId q : got) ids.push_back(q.index);
        REQUIRE(ids == std::vector<int>(oracle.begin(), oracle.end()));
    }
}

TEST_CASE("questions_for_concepts errors") {
    const auto map = small_map();
    CHECK_THROWS_AS(questions_for_concepts(map, {}), EmptyCandidateSet);
    CHECK_THROWS_AS(questions_for_concepts(map, {ConceptId(3)}), OutOfRangeId);
    const auto shared = questions_for_concepts(map, {ConceptId(1), ConceptId(2)});
    CHECK(shared.size() == 3);  // 2, 3, 4 with 4 counted once
}

TEST_CASE("LearningTarget sorts, deduplicates and rejects empty sets") {
    LearningTarget t({QuestionId(3), QuestionId(1), QuestionId(3)});
    REQUIRE(t.size() == 2);
    CHECK(t.questions()[0] == QuestionId(1));
    CHECK_THROWS_AS(LearningTarget(std::vector<QuestionId>{}), EmptySet);
}

TEST_CASE("validate_curriculum reports the exact worst-case candidate size") {
    const auto map = small_map();
    const auto r1 = validate_curriculum(map, 1);
    CHECK(r1.max_questions_per_concept == 2);
    CHECK(r1.max_candidate_size == 2);
    CHECK(r1.max_candidate_exact);
    const auto r2 = validate_curriculum(map, 2);
    CHECK(r2.max_candidate_size == 4);  // concepts 0 and 1: {0,1,2,4}
    CHECK(r2.concepts_fewer_than_questions);
}

TEST_CASE("IdDictionary orders numeric ids numerically, others lexicographically") {
    const auto numeric = IdDictionary::from_ids({"10", "9", "100", "9"});
    REQUIRE(numeric.size() == 3);
    CHECK(numeric.name(0) == "9");
    CHECK(numeric.name(2) == "100");
    const auto mixed = IdDictionary::from_ids({"b", "10", "a", "9"});
    CHECK(mixed.name(0) == "10");
    CHECK(mixed.name(1) == "9");
    CHECK(mixed.find("zzz") == -1);
}

TEST_CASE("log CSV parsing skips comments, strips a BOM and reports bad rows") {
    std::istringstream in(
        "\xEF\xBB\xBFstudent_id,question_id,correct,session_id,timestamp\n"
        "# a comment\n"
        "s1,q2,1,a,5\n"
        "s1,q1,0,a,3\n"
        "s2,q1,1,b,1\n");
    const auto rows = read_log_csv(in);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].student_id == "s1");

    std::istringstream bad("student_id,question_id,correct,session_id,timestamp\ns1,q1,2,a,1\n");
    CHECK_THROWS_AS(read_log_csv(bad), MalformedRow);
    std::istringstream short_row("student_id,question_id,correct,session_id,timestamp\ns1,q1\n");
    CHECK_THROWS_AS(read_log_csv(short_row), MalformedRow);
}

TEST_CASE("parse_logs groups sessions, orders by timestamp and counts unknown ids") {
    const auto dict = IdDictionary::from_ids({"q1", "q2"});
    const std::vector<RawLogRow> rows{{"s1", "q2", 1, "a", 5}, {"s1", "q1", 0, "a", 3}, {"s1", "qX", 1, "a", 4},
                                      {"s2", "q1", 1, "b", 1}, {"s1", "q2", 0, "a", 3}};
    const auto parsed = parse_logs(rows, dict);
    REQUIRE(parsed.sessions.size() == 2);
    const auto& h = parsed.sessions[0].history;
    REQUIRE(h.size() == 3);
    // timestamp 3 twice: input order decides.
    CHECK(h[0] == InteractionRecord{QuestionId(0), 0});
    CHECK(h[1] == InteractionRecord{QuestionId(1), 0});
    CHECK(h[2] == InteractionRecord{QuestionId(1), 1});
    CHECK(parsed.unknown_questions.at("qX") == 1);
}

TEST_CASE("log CSV write/read round trip is lossless") {
    const std::vector<RawLogRow> rows{{"1", "3", 1, "1", 0}, {"1", "0", 0, "1", 1}, {"2", "7", 1, "x", 12}};
    std::stringstream ss;
    write_log_csv(ss, rows);
    const auto back = read_log_csv(ss);
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].student_id == rows[i].student_id);
        CHECK(back[i].question_id == rows[i].question_id);
        CHECK(back[i].correct == rows[i].correct);
        CHECK(back[i].session_id == rows[i].session_id);
        CHECK(back[i].timestamp == rows[i].timestamp);
    }
}

TEST_CASE("curriculum CSV round trip") {
    const auto map = small_map();
    std::stringstream ss;
    write_curriculum_csv(ss, map);
    const auto bundle = read_curriculum_csv(ss);
    CHECK(bundle.map.edges() == map.edges());
    CHECK(bundle.questions.size() == 5);
}
