#pragma once

#include "quest/corpus.hpp"
#include "quest/embeddings.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

namespace qt {

// Text of exactly n wordpunct tokens drawn from a per-document vocabulary.
inline std::string words(std::size_t n, const std::string& stem = "w")
{
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i)
            out += ' ';
        out += stem + std::to_string(i);
    }
    return out;
}

struct DocSpec {
    std::string id;
    std::size_t tokens;
    std::string domain = {};
};

inline quest::CorpusStore store(const std::vector<DocSpec>& specs)
{
    std::vector<quest::Document> docs;
    for (const auto& s : specs) {
        quest::Document d;
        d.id = s.id;
        d.text = words(s.tokens, s.id + "x");
        if (!s.domain.empty())
            d.domain = s.domain;
        d.token_count = s.tokens;
        docs.push_back(std::move(d));
    }
    return quest::CorpusStore("wordpunct", std::move(docs));
}

inline quest::EmbeddingMatrix<double> matrix(const quest::CorpusStore& corpus,
                                             const std::vector<std::vector<double>>& rows)
{
    using M = quest::EmbeddingMatrix<double>::Matrix;
    M m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        const double n = m.row(static_cast<Eigen::Index>(i)).norm();
        if (n > 0)
            m.row(static_cast<Eigen::Index>(i)) /= n;
    }
    std::vector<std::string> ids;
    for (const auto& d : corpus.documents())
        ids.push_back(d.id);
    return {std::move(m), std::move(ids), std::vector<bool>(rows.size(), true),
            quest::EmbeddingProvenance::external};
}

class TempDir {
public:
    TempDir()
    {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("qw_unit_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content)
{
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace qt
