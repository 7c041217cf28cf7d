#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hierrec {

class Rng;

template <class Tag>
struct DenseId {
    std::int32_t index = 0;

    constexpr DenseId() = default;
    constexpr explicit DenseId(std::int32_t i) : index(i) {}
    constexpr explicit DenseId(std::size_t i) : index(static_cast<std::int32_t>(i)) {}

    constexpr std::size_t idx() const noexcept { return static_cast<std::size_t>(index); }
    constexpr auto operator<=>(const DenseId&) const = default;
};

struct ConceptTag {};
struct QuestionTag {};
using ConceptId = DenseId<ConceptTag>;
using QuestionId = DenseId<QuestionTag>;

struct Edge {
    QuestionId question;
    ConceptId concept_id;
    auto operator<=>(const Edge&) const = default;
};

/// Immutable many-to-many question/concept relation. Both directions are
/// stored sorted, so lookups are deterministic.
class CurriculumMap {
public:
    /// Throws OutOfRangeId, OrphanQuestion, InvalidArgument (empty edge list).
    static CurriculumMap build(std::size_t m, std::size_t n, std::vector<Edge> edges);

    /// One concept per question, question i <-> concept i.
    static CurriculumMap one_to_one(std::size_t m);

    std::size_t num_concepts() const noexcept { return concept_questions_.size(); }
    std::size_t num_questions() const noexcept { return question_concepts_.size(); }

    const std::vector<ConceptId>& concepts_of(QuestionId q) const;
    const std::vector<QuestionId>& questions_of(ConceptId c) const;

    /// Sorted, deduplicated edge list.
    std::vector<Edge> edges() const;

    bool contains(QuestionId q) const noexcept { return q.index >= 0 && q.idx() < num_questions(); }
    bool contains(ConceptId c) const noexcept { return c.index >= 0 && c.idx() < num_concepts(); }

    /// Stable textual digest of the relation (used in checkpoint hashes).
    std::uint64_t digest() const;

private:
    std::vector<std::vector<ConceptId>> question_concepts_;
    std::vector<std::vector<QuestionId>> concept_questions_;
};

/// Candidate set Q_t: sorted union of the questions related to `concepts`.
/// Throws EmptyCandidateSet when the union is empty, OutOfRangeId on a bad id.
std::vector<QuestionId> questions_for_concepts(const CurriculumMap& map,
                                               const std::vector<ConceptId>& concepts);

struct InteractionRecord {
    QuestionId question;
    int correct = 0;  // 0 or 1
    bool operator==(const InteractionRecord&) const = default;
};

/// Ordered (question, correctness) records, oldest first. May be empty.
using LearningHistory = std::vector<InteractionRecord>;

/// Non-empty set of target questions, kept sorted and unique.
class LearningTarget {
public:
    LearningTarget() = default;
    /// Throws EmptySet when `questions` is empty.
    explicit LearningTarget(std::vector<QuestionId> questions);

    const std::vector<QuestionId>& questions() const noexcept { return questions_; }
    std::size_t size() const noexcept { return questions_.size(); }
    bool operator==(const LearningTarget&) const = default;

private:
    std::vector<QuestionId> questions_;
};

struct CurriculumReport {
    std::size_t num_concepts = 0;
    std::size_t num_questions = 0;
    std::vector<std::size_t> questions_per_concept;
    std::size_t max_questions_per_concept = 0;
    std::size_t k = 1;
    /// Largest |Q_t| over all k-subsets of concepts.
    std::size_t max_candidate_size = 0;
    /// False when the subset enumeration was too large and
    /// max_candidate_size holds the sum of the k largest concept sizes.
    bool max_candidate_exact = true;
    bool concepts_fewer_than_questions = false;
};

CurriculumReport validate_curriculum(const CurriculumMap& map, std::size_t k = 1);

/// Random curriculum: question q belongs to concept q mod m (so every concept
/// is covered) and, with probability `extra_concept_prob`, to one more.
CurriculumMap make_synthetic_curriculum(std::size_t m, std::size_t n, double extra_concept_prob,
                                        Rng& rng);

// ---------------------------------------------------------------------------
// Log ingestion

struct RawLogRow {
    std::string student_id;
    std::string question_id;
    int correct = 0;
    std::string session_id;
    std::int64_t timestamp = 0;
};

/// Sorted-order mapping from external string ids to dense indices. Ids that
/// all parse as integers are ordered numerically, otherwise lexicographically.
class IdDictionary {
public:
    IdDictionary() = default;
    static IdDictionary from_ids(std::vector<std::string> ids);

    std::size_t size() const noexcept { return names_.size(); }
    const std::string& name(std::size_t index) const { return names_.at(index); }
    /// -1 when unknown.
    std::int64_t find(const std::string& id) const;

    void save(const std::filesystem::path& path) const;
    static IdDictionary load(const std::filesystem::path& path);

    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

struct SessionHistory {
    std::string student_id;
    std::string session_id;
    LearningHistory history;
};

struct LogParseResult {
    /// Ordered by (student_id, session_id).
    std::vector<SessionHistory> sessions;
    /// Rows skipped because their question id is not in the dictionary.
    std::map<std::string, std::size_t> unknown_questions;
};

/// Groups rows by (student_id, session_id) and orders each session by
/// (timestamp, input order). Throws MalformedRow when correct is not 0/1.
LogParseResult parse_logs(const std::vector<RawLogRow>& rows, const IdDictionary& questions);

/// Reads `student_id,question_id,correct,session_id,timestamp`. Lines
/// starting with '#' are skipped. Throws MalformedRow with the line number.
std::vector<RawLogRow> read_log_csv(std::istream& in);
std::vector<RawLogRow> read_log_csv(const std::filesystem::path& path);
void write_log_csv(std::ostream& out, const std::vector<RawLogRow>& rows);

struct CurriculumBundle {
    CurriculumMap map;
    IdDictionary questions;
    IdDictionary concepts;
};

/// Reads `question_id,concept_id` and builds dictionaries for both columns.
CurriculumBundle read_curriculum_csv(std::istream& in);
CurriculumBundle read_curriculum_csv(const std::filesystem::path& path);
/// Writes dense ids as the external ids.
void write_curriculum_csv(std::ostream& out, const CurriculumMap& map);

}  // namespace hierrec
