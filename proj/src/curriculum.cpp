#include "hierrec/curriculum.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "hierrec/errors.hpp"
#include "hierrec/rng.hpp"

namespace hierrec {

CurriculumMap CurriculumMap::build(std::size_t m, std::size_t n, std::vector<Edge> edges) {
    if (edges.empty()) throw InvalidArgument("curriculum edge list is empty");
    CurriculumMap map;
    map.question_concepts_.resize(n);
    map.concept_questions_.resize(m);
    for (const Edge& e : edges) {
        if (e.question.index < 0 || e.question.idx() >= n)
            throw OutOfRangeId("question id " + std::to_string(e.question.index) +
                               " outside [0, " + std::to_string(n) + ")");
        if (e.concept_id.index < 0 || e.concept_id.idx() >= m)
            throw OutOfRangeId("concept id " + std::to_string(e.concept_id.index) + " outside [0, " +
                               std::to_string(m) + ")");
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    for (const Edge& e : edges) {
        map.question_concepts_[e.question.idx()].push_back(e.concept_id);
        map.concept_questions_[e.concept_id.idx()].push_back(e.question);
    }
    for (std::size_t q = 0; q < n; ++q)
        if (map.question_concepts_[q].empty())
            throw OrphanQuestion("question " + std::to_string(q) + " has no concept");
    for (auto& qs : map.concept_questions_) std::sort(qs.begin(), qs.end());
    return map;
}

CurriculumMap CurriculumMap::one_to_one(std::size_t m) {
    std::vector<Edge> edges;
    edges.reserve(m);
    for (std::size_t i = 0; i < m; ++i) edges.push_back({QuestionId(i), ConceptId(i)});
    return build(m, m, std::move(edges));
}

const std::vector<ConceptId>& CurriculumMap::concepts_of(QuestionId q) const {
    if (!contains(q)) throw OutOfRangeId("question id " + std::to_string(q.index));
    return question_concepts_[q.idx()];
}

const std::vector<QuestionId>& CurriculumMap::questions_of(ConceptId c) const {
    if (!contains(c)) throw OutOfRangeId("concept id " + std::to_string(c.index));
    return concept_questions_[c.idx()];
}

std::vector<Edge> CurriculumMap::edges() const {
    std::vector<Edge> out;
    for (std::size_t q = 0; q < question_concepts_.size(); ++q)
        for (ConceptId c : question_concepts_[q]) out.push_back({QuestionId(q), c});
    return out;
}

std::uint64_t CurriculumMap::digest() const {
    std::ostringstream os;
    os << num_concepts() << ':' << num_questions() << ':';
    for (const Edge& e : edges()) os << e.question.index << ',' << e.concept_id.index << ';';
    return fnv1a(os.str());
}

std::vector<QuestionId> questions_for_concepts(const CurriculumMap& map,
                                               const std::vector<ConceptId>& concepts) {
    std::vector<QuestionId> out;
    for (ConceptId c : concepts) {
        const auto& qs = map.questions_of(c);
        out.insert(out.end(), qs.begin(), qs.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    if (out.empty()) throw EmptyCandidateSet("no questions related to the selected concepts");
    return out;
}

LearningTarget::LearningTarget(std::vector<QuestionId> questions) : questions_(std::move(questions)) {
    if (questions_.empty()) throw EmptySet("learning target must contain at least one question");
    std::sort(questions_.begin(), questions_.end());
    questions_.erase(std::unique(questions_.begin(), questions_.end()), questions_.end());
}

namespace {

double log_binomial(std::size_t n, std::size_t k) {
    return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
           std::lgamma(static_cast<double>(n - k) + 1);
}

constexpr double kMaxEnumeratedSubsets = 2e6;

}  // namespace

CurriculumReport validate_curriculum(const CurriculumMap& map, std::size_t k) {
    CurriculumReport r;
    r.num_concepts = map.num_concepts();
    r.num_questions = map.num_questions();
    r.k = k;
    r.concepts_fewer_than_questions = r.num_concepts < r.num_questions;
    for (std::size_t c = 0; c < r.num_concepts; ++c) {
        const std::size_t count = map.questions_of(ConceptId(c)).size();
        r.questions_per_concept.push_back(count);
        r.max_questions_per_concept = std::max(r.max_questions_per_concept, count);
    }
    if (k == 0 || k > r.num_concepts) return r;

    if (std::exp(log_binomial(r.num_concepts, k)) > kMaxEnumeratedSubsets) {
        auto sizes = r.questions_per_concept;
        std::sort(sizes.rbegin(), sizes.rend());
        r.max_candidate_size = std::min<std::size_t>(
            r.num_questions, std::accumulate(sizes.begin(), sizes.begin() + k, std::size_t{0}));
        r.max_candidate_exact = false;
        return r;
    }

    // Enumerate k-subsets in lexicographic order.
    std::vector<std::size_t> pick(k);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    std::vector<ConceptId> subset(k);
    while (true) {
        for (std::size_t i = 0; i < k; ++i) subset[i] = ConceptId(pick[i]);
        std::size_t size = 0;
        try {
            size = questions_for_concepts(map, subset).size();
        } catch (const EmptyCandidateSet&) {
            size = 0;
        }
        r.max_candidate_size = std::max(r.max_candidate_size, size);
        std::size_t i = k;
        while (i > 0 && pick[i - 1] == r.num_concepts - k + (i - 1)) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
    return r;
}

CurriculumMap make_synthetic_curriculum(std::size_t m, std::size_t n, double extra_concept_prob,
                                        Rng& rng) {
    if (m == 0 || n < m) throw InvalidArgument("synthetic curriculum needs 1 <= m <= n");
    std::vector<Edge> edges;
    edges.reserve(n + n / 4);
    for (std::size_t q = 0; q < n; ++q) {
        const std::size_t primary = q % m;
        edges.push_back({QuestionId(q), ConceptId(primary)});
        if (m > 1 && rng.bernoulli(extra_concept_prob)) {
            std::size_t other = rng.below(m - 1);
            if (other >= primary) ++other;
            edges.push_back({QuestionId(q), ConceptId(other)});
        }
    }
    return CurriculumMap::build(m, n, std::move(edges));
}

// ---------------------------------------------------------------------------

namespace {

bool parse_int64(std::string_view s, std::int64_t& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return fields;
}

bool skip_line(std::string_view line) {
    line = trim(line);
    return line.empty() || line.front() == '#';
}

/// Returns data lines (with their 1-based line numbers) after checking the header.
std::vector<std::pair<std::size_t, std::string>> read_table(std::istream& in,
                                                            std::string_view header) {
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::string line;
    std::size_t lineno = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_line(line)) continue;
        if (!seen_header) {
            std::string_view h = trim(line);
            if (h.size() >= 3 && static_cast<unsigned char>(h[0]) == 0xEF) h.remove_prefix(3);
            if (h != header)
                throw MalformedRow("line " + std::to_string(lineno) + ": expected header '" +
                                   std::string(header) + "'");
            seen_header = true;
            continue;
        }
        lines.emplace_back(lineno, line);
    }
    if (!seen_header) throw MalformedRow("missing header '" + std::string(header) + "'");
    return lines;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    return in;
}

}  // namespace

IdDictionary IdDictionary::from_ids(std::vector<std::string> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    const bool numeric = std::all_of(ids.begin(), ids.end(), [](const std::string& s) {
        std::int64_t v = 0;
        return parse_int64(s, v);
    });
    if (numeric) {
        std::stable_sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
            std::int64_t x = 0, y = 0;
            parse_int64(a, x);
            parse_int64(b, y);
            return x < y;
        });
    }
    IdDictionary d;
    d.names_ = std::move(ids);
    for (std::size_t i = 0; i < d.names_.size(); ++i) d.index_.emplace(d.names_[i], i);
    return d;
}

std::int64_t IdDictionary::find(const std::string& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

void IdDictionary::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write dictionary: " + path.string());
    for (const auto& n : names_) out << n << '\n';
}

IdDictionary IdDictionary::load(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    IdDictionary d;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        d.index_.emplace(line, d.names_.size());
        d.names_.push_back(line);
    }
    return d;
}

LogParseResult parse_logs(const std::vector<RawLogRow>& rows, const IdDictionary& questions) {
    struct Keyed {
        std::int64_t timestamp;
        std::size_t order;
        InteractionRecord record;
    };
    std::map<std::pair<std::string, std::string>, std::vector<Keyed>> grouped;
    LogParseResult result;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const RawLogRow& row = rows[i];
        if (row.correct != 0 && row.correct != 1)
            throw MalformedRow("row " + std::to_string(i) + ": correct must be 0 or 1, got " +
                               std::to_string(row.correct));
        const std::int64_t q = questions.find(row.question_id);
        if (q < 0) {
            ++result.unknown_questions[row.question_id];
            continue;
        }
        grouped[{row.student_id, row.session_id}].push_back(
            {row.timestamp, i, {QuestionId(static_cast<std::size_t>(q)), row.correct}});
    }
    for (auto& [key, recs] : grouped) {
        std::sort(recs.begin(), recs.end(), [](const Keyed& a, const Keyed& b) {
            return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.order < b.order;
        });
        SessionHistory s{key.first, key.second, {}};
        s.history.reserve(recs.size());
        for (const auto& k : recs) s.history.push_back(k.record);
        result.sessions.push_back(std::move(s));
    }
    return result;
}

std::vector<RawLogRow> read_log_csv(std::istream& in) {
    std::vector<RawLogRow> rows;
    for (const auto& [lineno, line] :
         read_table(in, "student_id,question_id,correct,session_id,timestamp")) {
        const auto f = split_commas(line);
        const std::string where = "line " + std::to_string(lineno) + ": ";
        if (f.size() != 5) throw MalformedRow(where + "expected 5 fields");
        RawLogRow row;
        row.student_id = std::string(f[0]);
        row.question_id = std::string(f[1]);
        std::int64_t correct = 0;
        if (!parse_int64(f[2], correct) || (correct != 0 && correct != 1))
            throw MalformedRow(where + "correct must be 0 or 1");
        row.correct = static_cast<int>(correct);
        row.session_id = std::string(f[3]);
        if (!parse_int64(f[4], row.timestamp)) throw MalformedRow(where + "unparseable timestamp");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<RawLogRow> read_log_csv(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_log_csv(in);
}

void write_log_csv(std::ostream& out, const std::vector<RawLogRow>& rows) {
    out << "student_id,question_id,correct,session_id,timestamp\n";
    for (const auto& r : rows)
        out << r.student_id << ',' << r.question_id << ',' << r.correct << ',' << r.session_id
            << ',' << r.timestamp << '\n';
}

CurriculumBundle read_curriculum_csv(std::istream& in) {
    std::vector<std::pair<std::string, std::string>> raw;
    for (const auto& [lineno, line] : read_table(in, "question_id,concept_id")) {
        const auto f = split_commas(line);
        if (f.size() != 2 || f[0].empty() || f[1].empty())
            throw MalformedRow("line " + std::to_string(lineno) + ": expected 2 fields");
        raw.emplace_back(std::string(f[0]), std::string(f[1]));
    }
    std::vector<std::string> qs, cs;
    for (const auto& [q, c] : raw) {
        qs.push_back(q);
        cs.push_back(c);
    }
    CurriculumBundle b{CurriculumMap{}, IdDictionary::from_ids(std::move(qs)),
                       IdDictionary::from_ids(std::move(cs))};
    std::vector<Edge> edges;
    edges.reserve(raw.size());
    for (const auto& [q, c] : raw)
        edges.push_back({QuestionId(static_cast<std::size_t>(b.questions.find(q))),
                         ConceptId(static_cast<std::size_t>(b.concepts.find(c)))});
    b.map = CurriculumMap::build(b.concepts.size(), b.questions.size(), std::move(edges));
    return b;
}

CurriculumBundle read_curriculum_csv(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_curriculum_csv(in);
}

void write_curriculum_csv(std::ostream& out, const CurriculumMap& map) {
    out << "question_id,concept_id\n";
    for (const Edge& e : map.edges()) out << e.question.index << ',' << e.concept_id.index << '\n';
}

}  // namespace hierrec
