#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace quest {

struct KeywordCandidate {
    std::string phrase;
    double score = 0.0;

    friend bool operator==(const KeywordCandidate&, const KeywordCandidate&) = default;
};

struct KeywordAssignment {
    std::string doc_id;
    std::optional<std::string> keyword; // empty: document is unkeyed
    std::vector<KeywordCandidate> candidates;

    friend bool operator==(const KeywordAssignment&, const KeywordAssignment&) = default;
};

using PhraseSet = std::unordered_set<std::string>;

// Bundled English stopword list (the 179-word NLTK list).
inline constexpr std::string_view kStopwordListVersion = "nltk-english-179";
const PhraseSet& english_stopwords();

// Stop keywords: the published list plus a small documented extension.
std::span<const std::string_view> published_stop_keywords();
std::span<const std::string_view> extended_stop_keywords();
PhraseSet default_stop_keywords();

// One phrase per line; blank lines and lines starting with '#' are skipped.
// Entries are normalized with normalize_phrase.
PhraseSet load_phrase_file(const std::filesystem::path& path);

// Lowercase, drop punctuation, collapse whitespace.
std::string normalize_phrase(std::string_view text);

struct RakeOptions {
    // Phrases with more words are discarded; 0 means uncapped.
    std::size_t max_phrase_words = 0;
};

// Candidates are maximal runs of words between stopwords and punctuation.
// word score = degree / frequency, phrase score = sum of its word scores.
// Returned sorted by descending score, then phrase.
std::vector<KeywordCandidate> rake_extract(std::string_view text, const PhraseSet& stopwords,
                                           const RakeOptions& options = {});

inline constexpr double kMinRakeScore = 3.0;
inline constexpr std::size_t kMinKeywordChars = 4;

std::vector<KeywordCandidate> filter_keywords(std::span<const KeywordCandidate> candidates,
                                              const PhraseSet& stop_keywords);

// Merges candidate lists, keeping the maximum score per phrase.
std::vector<KeywordCandidate> pool_candidates(std::span<const std::vector<KeywordCandidate>> lists);

enum class SelectionStrategy { random, max_score };

SelectionStrategy parse_selection_strategy(std::string_view name);
std::string_view to_string(SelectionStrategy strategy);

// random: seeded uniform draw over candidates ordered by phrase.
// max_score: highest score, ties to the lexicographically smaller phrase.
std::optional<std::string> select_representative(std::span<const KeywordCandidate> candidates,
                                                 SelectionStrategy strategy, std::uint64_t seed);

struct KeywordOptions {
    RakeOptions rake;
    SelectionStrategy strategy = SelectionStrategy::random;
    std::uint64_t seed = 0;
};

struct KeywordStats {
    std::size_t extracted = 0;
    std::size_t kept = 0;
    std::size_t dropped = 0;
    std::size_t unkeyed = 0;
};

// Extracts from every query of one document, pools, filters and selects.
// The per-document draw uses a stream derived from (seed, doc_ordinal).
KeywordAssignment assign_keyword(std::string doc_id, std::span<const std::string> queries,
                                 std::uint64_t doc_ordinal, const PhraseSet& stopwords,
                                 const PhraseSet& stop_keywords, const KeywordOptions& options,
                                 KeywordStats* stats = nullptr);

// {"doc_id", "keyword" | null, "candidates": [{"phrase", "score"}]} per line.
void write_assignments(std::ostream& out, std::span<const KeywordAssignment> assignments);
std::vector<KeywordAssignment> read_assignments(std::istream& in);

} // namespace quest
