#pragma once

#include "quest/tokenizer.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace quest {

// Position of a document inside its CorpusStore.
using DocIndex = std::uint32_t;

struct Document {
    std::string id;
    std::string text;
    std::optional<std::string> domain;
    std::uint64_t token_count = 0;

    friend bool operator==(const Document&, const Document&) = default;
};

struct Segment {
    std::string doc_id;
    std::size_t index = 0;
    std::string text;
    std::size_t token_count = 0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

// Ordered, immutable collection of documents. Iteration order is ingestion
// order; ids are unique.
class CorpusStore {
public:
    CorpusStore() = default;
    // Throws DataError on a duplicate id.
    CorpusStore(std::string tokenizer_id, std::vector<Document> documents);

    const std::vector<Document>& documents() const { return documents_; }
    const Document& operator[](DocIndex i) const { return documents_[i]; }
    std::size_t size() const { return documents_.size(); }
    bool empty() const { return documents_.empty(); }

    const std::string& tokenizer_id() const { return tokenizer_id_; }
    std::uint64_t total_tokens() const { return total_tokens_; }

    std::optional<DocIndex> find(std::string_view id) const;
    // Throws LookupError for an unknown id.
    DocIndex index_of(std::string_view id) const;

    friend bool operator==(const CorpusStore& a, const CorpusStore& b)
    {
        return a.tokenizer_id_ == b.tokenizer_id_ && a.total_tokens_ == b.total_tokens_ &&
               a.documents_ == b.documents_;
    }

private:
    std::string tokenizer_id_;
    std::vector<Document> documents_;
    std::uint64_t total_tokens_ = 0;
    std::unordered_map<std::string, DocIndex> by_id_;
};

struct IngestOptions {
    TokenizerConfig tokenizer;
    // Abort on the first malformed line instead of skipping it.
    bool strict = false;
};

struct IngestIssue {
    std::size_t line = 0; // 1-based
    std::string reason;
};

struct IngestResult {
    CorpusStore store;
    std::vector<IngestIssue> skipped;
};

// Reads one JSON object per line: {"id", "text", "domain"?, "token_count"?}.
// A supplied token_count takes precedence over the tokenizer. Blank lines are
// ignored. Duplicate ids always abort with DataError.
IngestResult ingest(std::istream& jsonl, const IngestOptions& options = {});

// Persists a store as <dir>/manifest.json + <dir>/records.jsonl. The record
// file is itself valid ingest input.
void write_store(const CorpusStore& store, const std::filesystem::path& dir);
CorpusStore read_store(const std::filesystem::path& dir);

// Greedy left-to-right split on token boundaries. Segment k starts at its
// first token (segment 0 at byte 0) and runs up to the next segment, so the
// concatenation of all segments is the original text.
std::vector<Segment> segment(const Document& doc, std::size_t max_tokens, const Tokenizer& tokenizer);

// Byte offset just past the first `tokens` tokens of text (clamped).
std::size_t token_prefix_end(std::string_view text, std::size_t tokens, const Tokenizer& tokenizer);

} // namespace quest
