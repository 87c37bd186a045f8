#include "quest/embeddings.hpp"

#include "quest/tokenizer.hpp"

#include <json.hpp>

#include <fstream>

namespace quest {

namespace detail {

std::vector<std::string> embedding_terms(std::string_view text)
{
    const std::string lowered = ascii_lower(text);
    const Tokenizer tokenizer(TokenizerConfig{"wordpunct"});
    std::vector<std::string> out;
    for (const auto& span : tokenizer.tokenize(lowered)) {
        if (is_word_byte(static_cast<unsigned char>(lowered[span.begin])))
            out.emplace_back(lowered, span.begin, span.end - span.begin);
    }
    return out;
}

} // namespace detail

ExternalEmbeddingLoad load_external_embeddings(const std::filesystem::path& path, const CorpusStore& corpus)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot read embedding file: " + path.string());

    ExternalEmbeddingLoad out;
    EmbeddingMatrix<double>::Matrix vectors;
    std::vector<bool> present(corpus.size(), false);
    Eigen::Index dim = -1;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("doc_id") || !rec.contains("vector") ||
            !rec["vector"].is_array())
            throw DataError("embedding file line " + std::to_string(line_no) + ": malformed record");
        const auto id = rec["doc_id"].get<std::string>();
        const auto doc = corpus.find(id);
        if (!doc)
            throw DataError("embedding file line " + std::to_string(line_no) + ": unknown document " + id);
        const auto& values = rec["vector"];
        if (dim < 0) {
            dim = static_cast<Eigen::Index>(values.size());
            if (dim < 1)
                throw DataError("embedding file: empty vector");
            vectors = EmbeddingMatrix<double>::Matrix::Zero(static_cast<Eigen::Index>(corpus.size()), dim);
        } else if (static_cast<Eigen::Index>(values.size()) != dim) {
            throw DataError("embedding file line " + std::to_string(line_no) + ": dimension mismatch");
        }
        if (present[*doc])
            throw DataError("embedding file: duplicate vector for " + id);
        auto row = vectors.row(*doc);
        for (Eigen::Index j = 0; j < dim; ++j)
            row(j) = values[static_cast<std::size_t>(j)].get<double>();
        const double norm = row.norm();
        if (std::abs(norm - 1.0) > 1e-3)
            out.warnings.push_back("vector for " + id + " had norm " + std::to_string(norm) + "; re-normalized");
        if (norm > 0.0)
            row /= norm;
        present[*doc] = true;
    }
    if (dim < 0)
        throw DataError("embedding file has no vectors: " + path.string());
    std::vector<std::string> ids;
    ids.reserve(corpus.size());
    for (const auto& d : corpus.documents())
        ids.push_back(d.id);
    out.matrix = EmbeddingMatrix<double>(std::move(vectors), std::move(ids), std::move(present),
                                         EmbeddingProvenance::external);
    return out;
}

} // namespace quest
