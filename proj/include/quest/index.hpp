#pragma once

#include "quest/corpus.hpp"
#include "quest/keywords.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace quest {

struct Bucket {
    std::string keyword;
    std::vector<DocIndex> docs; // corpus order
    std::uint64_t token_mass = 0;

    friend bool operator==(const Bucket&, const Bucket&) = default;
};

// Keyword -> documents. Every keyed document sits in exactly one bucket;
// unkeyed documents live in the reserved pool.
class InvertedIndex {
public:
    InvertedIndex() = default;
    InvertedIndex(std::vector<Bucket> buckets, std::vector<DocIndex> pool);

    const std::vector<Bucket>& buckets() const { return buckets_; } // sorted by keyword
    const std::vector<DocIndex>& pool() const { return pool_; }
    std::size_t keyword_count() const { return buckets_.size(); }
    const Bucket* find(std::string_view keyword) const;

    // Bucket position of a keyed document, nullopt for pooled ones.
    std::optional<std::size_t> bucket_of(DocIndex doc) const;

    friend bool operator==(const InvertedIndex& a, const InvertedIndex& b)
    {
        return a.buckets_ == b.buckets_ && a.pool_ == b.pool_;
    }

private:
    std::vector<Bucket> buckets_;
    std::vector<DocIndex> pool_;
    std::vector<std::int64_t> bucket_of_doc_;
};

// Throws DataError when an assignment names an unknown document or a
// document is assigned twice. Documents without an assignment are pooled.
InvertedIndex build_index(std::span<const KeywordAssignment> assignments, const CorpusStore& corpus);

struct IndexSplit {
    double split_ratio = 0.0;
    std::uint64_t context_length = 0;         // L used for the capacities
    std::vector<std::size_t> short_set;       // bucket positions, ascending size
    std::vector<std::size_t> long_set;
    std::uint64_t short_mass = 0;
    std::uint64_t long_mass = 0;
    std::uint64_t n_short = 0;                // floor(mass / L) whole contexts
    std::uint64_t n_long = 0;
};

// Keywords sorted ascending by document count, ties by keyword; the first
// round(r * K) go to the short set.
IndexSplit split_index(const InvertedIndex& index, double split_ratio, std::uint64_t context_length);

// The keyword order split_index cuts (bucket positions).
std::vector<std::size_t> size_order(const InvertedIndex& index);

struct SamplePlan {
    double oversample_p = 0.0;
    std::uint64_t total = 0;
    std::uint64_t short_samples = 0;
    std::uint64_t long_samples = 0;

    friend bool operator==(const SamplePlan&, const SamplePlan&) = default;
};

// short = ceil((n_s / (n_s + n_l) + p) * N), clamped to [0, N]; long = N - short.
// Products within 1e-9 (relative) of an integer are treated as that integer
// so decimal inputs such as (0.1 + 0.2) * 1000 give 300.
SamplePlan plan_samples(std::uint64_t n_short, std::uint64_t n_long, double p, std::uint64_t total);

// Smallest p >= 0 giving the short set at least its per-keyword share:
// max(0, |I_s| / (|I_s| + |I_l|) - n_s / (n_s + n_l)).
double equalizing_p(const IndexSplit& split);
double equalizing_p(std::size_t short_keywords, std::size_t long_keywords, std::uint64_t n_short,
                    std::uint64_t n_long);

// <dir>/manifest.json (keywords, sizes, token masses, split) + <dir>/buckets.jsonl.
void write_index(const InvertedIndex& index, const IndexSplit& split, double oversample_p,
                 bool p_automatic, const CorpusStore& corpus, const std::filesystem::path& dir);

struct StoredIndex {
    InvertedIndex index;
    double split_ratio = 0.0;
    std::uint64_t context_length = 0;
    std::optional<double> oversample_p; // absent when chosen automatically
};

StoredIndex read_index(const std::filesystem::path& dir, const CorpusStore& corpus);

} // namespace quest
