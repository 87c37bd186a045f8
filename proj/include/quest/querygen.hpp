#pragma once

#include "quest/corpus.hpp"
#include "quest/keywords.hpp"

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace quest {

struct Query {
    std::string doc_id;
    std::size_t segment_index = 0;
    std::string text;

    friend bool operator==(const Query&, const Query&) = default;
};

// Document frequencies of lowercased word tokens over a corpus.
class IdfTable {
public:
    IdfTable() = default;
    explicit IdfTable(const CorpusStore& corpus);
    IdfTable(std::size_t documents, std::unordered_map<std::string, std::size_t> document_frequency);

    // ln(N / df); words never seen get ln(N) (df treated as 1).
    double idf(const std::string& word) const;
    std::size_t documents() const { return documents_; }

private:
    std::size_t documents_ = 0;
    std::unordered_map<std::string, std::size_t> df_;
};

// Lowercase, replace punctuation with spaces, collapse whitespace.
std::string normalize_query(std::string_view text);

// Splits at runs of . ! ? followed by whitespace or end of text, and at line
// breaks. Empty pieces are dropped.
std::vector<std::string_view> split_sentences(std::string_view text);

// Deterministic stand-in for a query model: the sentence whose non-stopword
// tokens have the largest IDF sum, normalized. Ties go to the earliest
// sentence. Returns nullopt when the normalized winner is empty.
std::optional<Query> predict_builtin(const Segment& segment, const IdfTable& idf,
                                     const PhraseSet& stopwords = english_stopwords());

struct PredictorOptions {
    std::string command;          // run via /bin/sh -c
    std::size_t batch = 32;       // in-flight request window
    std::size_t max_retries = 2;  // re-sends after an error response
};

struct PredictionResult {
    std::vector<Query> queries;                              // in segment order
    std::vector<std::pair<std::string, std::size_t>> empty;  // (doc_id, segment) with no query
    std::size_t retries = 0;
};

// Streams segments to a predictor subprocess over stdin/stdout, one JSON
// object per line:
//   request  {"doc_id","segment","text"}
//   response {"doc_id","segment","query"}  or  {"error","doc_id","segment"}
// Responses may arrive in any order within the window. Throws ProtocolError
// on malformed lines, unknown keys, early end of stream, or exhausted retries.
PredictionResult predict_external(std::span<const Segment> segments, const PredictorOptions& options);

// {"doc_id", "segment", "query"} per line.
void write_queries(std::ostream& out, std::span<const Query> queries);
std::vector<Query> read_queries(std::istream& in);

struct CorruptionResult {
    std::vector<KeywordAssignment> assignments;
    std::vector<std::string> replaced_doc_ids;
};

// Sorted distinct representative keywords.
std::vector<std::string> keyword_vocabulary(std::span<const KeywordAssignment> assignments);

// Each keyed document's representative keyword is replaced with probability
// `ratio` by a uniform draw from `vocabulary` (possibly itself). One seeded
// stream is consumed in assignment order.
CorruptionResult corrupt_keywords(std::span<const KeywordAssignment> assignments, double ratio,
                                  std::span<const std::string> vocabulary, std::uint64_t seed);

} // namespace quest
