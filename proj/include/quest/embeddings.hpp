#pragma once

#include "quest/corpus.hpp"
#include "quest/errors.hpp"
#include "quest/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace quest {

enum class EmbeddingProvenance { hashed_tfidf, external };

inline std::string_view to_string(EmbeddingProvenance p)
{
    return p == EmbeddingProvenance::hashed_tfidf ? "hashed_tfidf" : "external";
}

// dot(u, v) / (|u| |v|). Throws DomainError on a dimension mismatch or a
// zero-norm argument.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine(const Eigen::MatrixBase<DerivedA>& u, const Eigen::MatrixBase<DerivedB>& v)
{
    using Scalar = typename DerivedA::Scalar;
    if (u.size() != v.size())
        throw DomainError("cosine: dimension mismatch");
    const Scalar nu = u.norm();
    const Scalar nv = v.norm();
    if (nu == Scalar(0) || nv == Scalar(0))
        throw DomainError("cosine: zero-norm vector");
    const Scalar c = u.dot(v.template cast<Scalar>()) / (nu * nv);
    return std::clamp(c, Scalar(-1), Scalar(1));
}

// One unit-norm row per corpus document (row i = DocIndex i). Rows for
// documents without usable content are zero and not retrievable; rows never
// supplied by an external file are missing.
template <typename Scalar = double>
class EmbeddingMatrix {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    EmbeddingMatrix() = default;
    EmbeddingMatrix(Matrix vectors, std::vector<std::string> ids, std::vector<bool> present,
                    EmbeddingProvenance provenance)
        : vectors_(std::move(vectors)), ids_(std::move(ids)), present_(std::move(present)), provenance_(provenance)
    {
        retrievable_.resize(ids_.size());
        for (Eigen::Index i = 0; i < vectors_.rows(); ++i)
            retrievable_[static_cast<std::size_t>(i)] = present_[static_cast<std::size_t>(i)] &&
                                                        vectors_.row(i).squaredNorm() > Scalar(0);
        for (std::size_t i = 0; i < ids_.size(); ++i)
            by_id_.emplace(ids_[i], static_cast<DocIndex>(i));
    }

    Eigen::Index dim() const { return vectors_.cols(); }
    std::size_t size() const { return ids_.size(); }
    EmbeddingProvenance provenance() const { return provenance_; }
    const Matrix& vectors() const { return vectors_; }
    auto row(DocIndex i) const { return vectors_.row(i); }
    const std::string& id(DocIndex i) const { return ids_[i]; }

    bool present(DocIndex i) const { return present_[i]; }
    bool retrievable(DocIndex i) const { return retrievable_[i]; }

    DocIndex index_of(std::string_view id) const
    {
        auto it = by_id_.find(std::string(id));
        if (it == by_id_.end())
            throw LookupError("no embedding for document: " + std::string(id));
        return it->second;
    }

    // Unit rows, so the dot product is the cosine.
    Scalar similarity(DocIndex a, DocIndex b) const { return vectors_.row(a).dot(vectors_.row(b)); }

private:
    Matrix vectors_;
    std::vector<std::string> ids_;
    std::vector<bool> present_;
    std::vector<bool> retrievable_;
    std::unordered_map<std::string, DocIndex> by_id_;
    EmbeddingProvenance provenance_ = EmbeddingProvenance::hashed_tfidf;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Lowercased word tokens of a text (punctuation runs dropped).
std::vector<std::string> embedding_terms(std::string_view text);

} // namespace detail

inline constexpr Eigen::Index kDefaultEmbeddingDim = 1024;

// Signed feature hashing of unigram TF-IDF (tf = raw count,
// idf = ln((1 + N) / (1 + df)) + 1), then L2 normalization.
template <typename Scalar = double>
EmbeddingMatrix<Scalar> embed_corpus(const CorpusStore& corpus, Eigen::Index dim = kDefaultEmbeddingDim,
                                     std::uint64_t seed = 0)
{
    if (dim < 2)
        throw DomainError("embed_corpus: dim must be >= 2");
    const std::size_t n = corpus.size();

    std::vector<std::unordered_map<std::string, std::uint32_t>> tf(n);
    std::unordered_map<std::string, std::uint32_t> df;
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& term : detail::embedding_terms(corpus[static_cast<DocIndex>(i)].text))
            ++tf[i][std::move(term)];
        for (const auto& [term, count] : tf[i])
            ++df[term];
    }

    typename EmbeddingMatrix<Scalar>::Matrix vectors = EmbeddingMatrix<Scalar>::Matrix::Zero(
        static_cast<Eigen::Index>(n), dim);
    std::vector<std::string> ids;
    ids.reserve(n);
    const double docs = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(corpus[static_cast<DocIndex>(i)].id);
        // Sorted terms make the floating-point accumulation order fixed.
        std::vector<std::pair<std::string_view, std::uint32_t>> terms(tf[i].begin(), tf[i].end());
        std::sort(terms.begin(), terms.end());
        auto row = vectors.row(static_cast<Eigen::Index>(i));
        for (const auto& [term, count] : terms) {
            const std::uint64_t h = derive_seed(seed, detail::fnv1a(term));
            const auto slot = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim));
            const double sign = (h >> 63) ? -1.0 : 1.0;
            const double idf = std::log((1.0 + docs) / (1.0 + df[std::string(term)])) + 1.0;
            row(slot) += static_cast<Scalar>(sign * count * idf);
        }
        const Scalar norm = row.norm();
        if (norm > Scalar(0))
            row /= norm;
    }
    return EmbeddingMatrix<Scalar>(std::move(vectors), std::move(ids), std::vector<bool>(n, true),
                                   EmbeddingProvenance::hashed_tfidf);
}

struct Neighbor {
    DocIndex doc = 0;
    double cosine = 0.0;
};

// Exact scan over every retrievable row except the query. Descending cosine,
// ties by ascending document id; k is clamped to the number of candidates.
template <typename Scalar>
std::vector<Neighbor> knn_query(const EmbeddingMatrix<Scalar>& matrix, DocIndex query, std::size_t k)
{
    if (query >= matrix.size())
        throw LookupError("knn_query: unknown document index");
    if (k == 0)
        throw DomainError("knn_query: k must be >= 1");
    if (!matrix.retrievable(query))
        throw DomainError("knn_query: query document has no usable embedding: " + matrix.id(query));

    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> scores = matrix.vectors() * matrix.row(query).transpose();
    std::vector<Neighbor> candidates;
    candidates.reserve(matrix.size());
    for (DocIndex i = 0; i < matrix.size(); ++i) {
        if (i != query && matrix.retrievable(i))
            candidates.push_back({i, static_cast<double>(scores(i))});
    }
    auto better = [&](const Neighbor& a, const Neighbor& b) {
        if (a.cosine != b.cosine)
            return a.cosine > b.cosine;
        return matrix.id(a.doc) < matrix.id(b.doc);
    };
    k = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                      better);
    candidates.resize(k);
    return candidates;
}

template <typename Scalar>
std::vector<Neighbor> knn_query(const EmbeddingMatrix<Scalar>& matrix, std::string_view query_id, std::size_t k)
{
    return knn_query(matrix, matrix.index_of(query_id), k);
}

struct ExternalEmbeddingLoad {
    EmbeddingMatrix<double> matrix;
    std::vector<std::string> warnings;
};

// JSONL {"doc_id", "vector": [...]}. Rows are re-normalized; a warning is
// recorded when the supplied norm is off by more than 1e-3. Documents absent
// from the file are marked missing.
ExternalEmbeddingLoad load_external_embeddings(const std::filesystem::path& path, const CorpusStore& corpus);

} // namespace quest
