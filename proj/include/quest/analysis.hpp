#pragma once

#include "quest/corpus.hpp"
#include "quest/embeddings.hpp"
#include "quest/keywords.hpp"
#include "quest/synthesis.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace quest {

// Order-insensitive (pairwise) summation.
double pairwise_sum(std::span<const double> values);

// Mean cosine over all unordered pairs of distinct member documents that have
// usable embeddings; nullopt when fewer than two qualify.
std::optional<double> context_similarity(const ContextSample& sample, const EmbeddingMatrix<double>& matrix);

struct SimilarityStats {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t measured = 0;
    std::size_t skipped = 0;   // fewer than two embeddable members
    std::size_t samples = 0;   // samples considered (after any subsampling)
};

inline constexpr std::size_t kSimilaritySubsampleAbove = 100000;

// Over every sample, or a seeded subsample of kSimilaritySubsampleAbove when
// there are more.
SimilarityStats similarity_stats(std::span<const ContextSample> samples, const EmbeddingMatrix<double>& matrix,
                                 std::uint64_t seed = 0);

// Shannon entropy in bits of a count distribution.
double entropy_bits(std::span<const std::uint64_t> counts);

// Entropy of the representative keyword over keyed documents. Throws
// DomainError when no document is keyed.
double keyword_entropy(std::span<const KeywordAssignment> assignments);

using DomainHistogram = std::map<std::string, double>;

inline constexpr std::string_view kUnknownDomain = "unknown";

// Token-mass share per domain across all sample slices.
DomainHistogram domain_distribution(std::span<const ContextSample> samples, const CorpusStore& corpus);
double histogram_entropy(const DomainHistogram& histogram);

// Comparison set of native long documents: every document with at least L
// tokens, chunked into whole L-token samples.
std::vector<ContextSample> long_document_samples(const CorpusStore& corpus, std::uint64_t length);

struct MethodDiagnostics {
    std::string label;
    SimilarityStats similarity;
    DomainHistogram domains;
    std::size_t samples = 0;
};

struct DiagnosticsReport {
    std::vector<MethodDiagnostics> methods;
    std::optional<double> keyword_entropy_bits;
    std::size_t keyed_documents = 0;
    std::size_t unkeyed_documents = 0;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

MethodDiagnostics diagnose_method(std::string label, std::span<const ContextSample> samples,
                                  const CorpusStore& corpus, const EmbeddingMatrix<double>& matrix,
                                  std::uint64_t seed = 0);

// One line per (sample, member document): {"sample","method","doc_id","vector"}
// for rendering a 2-D projection externally.
void write_embedding_dump(std::ostream& out, std::span<const ContextSample> samples, const CorpusStore& corpus,
                          const EmbeddingMatrix<double>& matrix);

} // namespace quest
