#include "helpers.hpp"
#include "support/pipeline.hpp"

#include "quest/embeddings.hpp"
#include "quest/errors.hpp"

#include <gtest/gtest.h>

using namespace quest;

namespace {

CorpusStore text_store(const std::vector<std::pair<std::string, std::string>>& docs)
{
    std::vector<Document> out;
    const Tokenizer tok;
    for (const auto& [id, text] : docs)
        out.push_back({id, text, std::nullopt, tok.count(text)});
    return CorpusStore("wordpunct", std::move(out));
}

} // namespace

TEST(Cosine, Examples)
{
    const Eigen::Vector3d u(1, 1, 0);
    const Eigen::Vector3d v(1, 0, 0);
    EXPECT_DOUBLE_EQ(cosine(u, u), 1.0);
    EXPECT_DOUBLE_EQ(cosine(Eigen::Vector3d(0, 1, 0), v), 0.0);
    EXPECT_NEAR(cosine(u / std::sqrt(2.0), v), 0.7071, 1e-4);
    EXPECT_NEAR(cosine(u, v), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Cosine, ZeroNormAndDimMismatchAreDomainErrors)
{
    EXPECT_THROW(cosine(Eigen::Vector3d::Zero(), Eigen::Vector3d(1, 0, 0)), DomainError);
    EXPECT_THROW(cosine(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(4)), DomainError);
}

TEST(Cosine, SymmetryAndRange)
{
    std::mt19937_64 gen(4);
    std::normal_distribution<double> n;
    for (int t = 0; t < 500; ++t) {
        Eigen::VectorXd a(16), b(16);
        for (int i = 0; i < 16; ++i) {
            a[i] = n(gen);
            b[i] = n(gen);
        }
        EXPECT_NEAR(cosine(a, b), cosine(b, a), 1e-12);
        EXPECT_LE(std::abs(cosine(a, b)), 1.0);
    }
}

TEST(Cosine, FloatScalars)
{
    const Eigen::Vector2f a(1, 0);
    const Eigen::Vector2f b(1, 1);
    EXPECT_NEAR(cosine(a, b), 0.70710677f, 1e-6f);
}

TEST(Embed, IdenticalDocumentsIdenticalVectors)
{
    const auto corpus = text_store({{"a", "solar panels degrade"}, {"b", "solar panels degrade"}, {"c", "wind"}});
    const auto m = embed_corpus<double>(corpus, 64, 1);
    EXPECT_EQ(m.vectors().row(0), m.vectors().row(1));
    EXPECT_EQ(m.provenance(), EmbeddingProvenance::hashed_tfidf);
}

TEST(Embed, DisjointVocabulariesAreNearlyOrthogonal)
{
    const auto corpus = text_store({{"a", "alpha beta gamma delta epsilon"}, {"b", "zeta eta theta iota kappa"},
                                    {"c", "lambda mu nu xi omicron"}});
    const auto m = embed_corpus<double>(corpus, 1 << 16, 0);
    EXPECT_LT(std::abs(m.similarity(0, 1)), 0.05);
    EXPECT_LT(std::abs(m.similarity(1, 2)), 0.05);
}

TEST(Embed, EmptyDocumentIsFlagged)
{
    const auto corpus = text_store({{"a", "alpha beta"}, {"e", ""}, {"p", "?!"}});
    const auto m = embed_corpus<double>(corpus, 32, 0);
    EXPECT_TRUE(m.retrievable(0));
    EXPECT_FALSE(m.retrievable(1));
    EXPECT_FALSE(m.retrievable(2));
    EXPECT_THROW(knn_query(m, "e", 1), DomainError);
}

TEST(Embed, UnitNormsAndDeterminism)
{
    const auto corpus = quest::testing::clustered_store({.clusters = 3, .docs_per_cluster = 20});
    const auto a = embed_corpus<double>(corpus, 256, 5);
    const auto b = embed_corpus<double>(corpus, 256, 5);
    EXPECT_EQ(a.vectors(), b.vectors());
    for (DocIndex i = 0; i < a.size(); ++i)
        EXPECT_NEAR(a.row(i).norm(), 1.0, 1e-6);
    EXPECT_NE(embed_corpus<double>(corpus, 256, 6).vectors(), a.vectors());
    const auto f = embed_corpus<float>(corpus, 256, 5);
    EXPECT_NEAR(f.row(0).norm(), 1.0f, 1e-5f);
    EXPECT_THROW(embed_corpus<double>(corpus, 1, 0), DomainError);
}

TEST(Knn, DuplicateRanksFirst)
{
    const auto corpus = qt::store({{"q", 1}, {"x", 1}, {"dup", 1}, {"y", 1}});
    const auto m = qt::matrix(corpus, {{1, 2, 3}, {3, 2, 1}, {1, 2, 3}, {0, 1, 0}});
    const auto r = knn_query(m, "q", 2);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(m.id(r[0].doc), "dup");
    EXPECT_NEAR(r[0].cosine, 1.0, 1e-12);
}

TEST(Knn, ClampsKAndExcludesQuery)
{
    const auto corpus = qt::store({{"a", 1}, {"b", 1}, {"c", 1}});
    const auto m = qt::matrix(corpus, {{1, 0}, {1, 1}, {0, 1}});
    const auto r = knn_query(m, "a", 10);
    ASSERT_EQ(r.size(), 2u);
    for (const auto& n : r)
        EXPECT_NE(n.doc, 0u);
    EXPECT_THROW(knn_query(m, "zz", 1), LookupError);
    EXPECT_THROW(knn_query(m, "a", 0), DomainError);
}

TEST(Knn, TiesBreakByAscendingId)
{
    const auto corpus = qt::store({{"q", 1}, {"b", 1}, {"a", 1}, {"c", 1}});
    const auto m = qt::matrix(corpus, {{1, 0}, {0, 1}, {0, 1}, {0, 1}});
    const auto r = knn_query(m, DocIndex{0}, 3);
    EXPECT_EQ(m.id(r[0].doc), "a");
    EXPECT_EQ(m.id(r[1].doc), "b");
    EXPECT_EQ(m.id(r[2].doc), "c");
}

TEST(Knn, FiftyVectorRankingMatchesBruteForce)
{
    std::vector<qt::DocSpec> specs;
    std::vector<std::vector<double>> rows;
    std::mt19937_64 gen(50);
    std::normal_distribution<double> n;
    for (int i = 0; i < 50; ++i) {
        specs.push_back({"v" + std::to_string(i), 1});
        std::vector<double> row(8);
        for (auto& x : row)
            x = n(gen);
        rows.push_back(row);
    }
    const auto corpus = qt::store(specs);
    const auto m = qt::matrix(corpus, rows);
    for (DocIndex q = 0; q < 50; ++q) {
        std::vector<std::pair<double, DocIndex>> oracle;
        for (DocIndex j = 0; j < 50; ++j) {
            if (j == q)
                continue;
            double dot = 0, a = 0, b = 0;
            for (std::size_t c = 0; c < 8; ++c) {
                dot += rows[q][c] * rows[j][c];
                a += rows[q][c] * rows[q][c];
                b += rows[j][c] * rows[j][c];
            }
            oracle.push_back({dot / std::sqrt(a * b), j});
        }
        std::sort(oracle.begin(), oracle.end(), [](auto& x, auto& y) {
            return x.first != y.first ? x.first > y.first : x.second < y.second;
        });
        const auto got = knn_query(m, q, 49);
        ASSERT_EQ(got.size(), 49u);
        for (std::size_t r = 0; r < 49; ++r) {
            EXPECT_EQ(got[r].doc, oracle[r].second);
            EXPECT_NEAR(got[r].cosine, oracle[r].first, 1e-12);
        }
    }
}

TEST(External, LoadsRenormalizesAndWarns)
{
    const auto corpus = qt::store({{"a", 1}, {"b", 1}, {"c", 1}});
    qt::TempDir dir;
    qt::write_file(dir / "emb.jsonl", "{\"doc_id\":\"a\",\"vector\":[3,4]}\n{\"doc_id\":\"b\",\"vector\":[0.6,0.8]}\n");
    const auto loaded = load_external_embeddings(dir / "emb.jsonl", corpus);
    const auto& m = loaded.matrix;
    EXPECT_EQ(m.provenance(), EmbeddingProvenance::external);
    EXPECT_NEAR(m.row(0).norm(), 1.0, 1e-12);
    EXPECT_NEAR(m.similarity(0, 1), 1.0, 1e-12);
    EXPECT_EQ(loaded.warnings.size(), 1u);
    EXPECT_TRUE(m.present(1));
    EXPECT_FALSE(m.present(2));
}

TEST(External, RejectsMismatchedDimensionsAndUnknownIds)
{
    const auto corpus = qt::store({{"a", 1}, {"b", 1}});
    qt::TempDir dir;
    qt::write_file(dir / "dims.jsonl", "{\"doc_id\":\"a\",\"vector\":[1,0]}\n{\"doc_id\":\"b\",\"vector\":[1,0,0]}\n");
    EXPECT_THROW(load_external_embeddings(dir / "dims.jsonl", corpus), DataError);
    qt::write_file(dir / "ids.jsonl", "{\"doc_id\":\"zz\",\"vector\":[1,0]}\n");
    EXPECT_THROW(load_external_embeddings(dir / "ids.jsonl", corpus), DataError);
}
