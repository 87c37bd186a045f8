#include "quest/querygen.hpp"

#include "quest/errors.hpp"
#include "quest/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <istream>
#include <ostream>
#include <cmath>
#include <set>
#include <unordered_set>

namespace quest {

IdfTable::IdfTable(const CorpusStore& corpus) : documents_(corpus.size())
{
    const Tokenizer tokenizer(TokenizerConfig{"wordpunct"});
    std::unordered_set<std::string> seen;
    for (const auto& doc : corpus.documents()) {
        seen.clear();
        const auto lowered = ascii_lower(doc.text);
        for (const auto& span : tokenizer.tokenize(lowered)) {
            if (!is_word_byte(static_cast<unsigned char>(lowered[span.begin])))
                continue;
            seen.emplace(lowered.substr(span.begin, span.end - span.begin));
        }
        for (const auto& w : seen)
            ++df_[w];
    }
}

IdfTable::IdfTable(std::size_t documents, std::unordered_map<std::string, std::size_t> document_frequency)
    : documents_(documents), df_(std::move(document_frequency))
{
}

double IdfTable::idf(const std::string& word) const
{
    if (documents_ == 0)
        return 0.0;
    auto it = df_.find(word);
    const double df = it == df_.end() ? 1.0 : static_cast<double>(std::max<std::size_t>(it->second, 1));
    return std::log(static_cast<double>(documents_) / df);
}

std::string normalize_query(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (!is_word_byte(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space)
            out.push_back(' ');
        pending_space = false;
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : raw);
    }
    return out;
}

std::vector<std::string_view> split_sentences(std::string_view text)
{
    std::vector<std::string_view> out;
    auto push = [&](std::size_t b, std::size_t e) {
        std::string_view piece = text.substr(b, e - b);
        const bool has_content =
            std::any_of(piece.begin(), piece.end(), [](char c) { return !is_space_byte(static_cast<unsigned char>(c)); });
        if (has_content)
            out.push_back(piece);
    };
    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            push(start, i);
            start = ++i;
            continue;
        }
        if (c == '.' || c == '!' || c == '?') {
            std::size_t j = i;
            while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?'))
                ++j;
            if (j == text.size() || is_space_byte(static_cast<unsigned char>(text[j]))) {
                push(start, j);
                start = i = j;
                continue;
            }
            i = j;
            continue;
        }
        ++i;
    }
    push(start, text.size());
    return out;
}

std::optional<Query> predict_builtin(const Segment& segment, const IdfTable& idf, const PhraseSet& stopwords)
{
    auto sentences = split_sentences(segment.text);
    if (sentences.empty())
        sentences.push_back(segment.text);

    std::string best;
    double best_score = -1.0;
    for (auto sentence : sentences) {
        auto normalized = normalize_query(sentence);
        double score = 0.0;
        std::size_t pos = 0;
        while (pos < normalized.size()) {
            auto end = normalized.find(' ', pos);
            if (end == std::string::npos)
                end = normalized.size();
            std::string word = normalized.substr(pos, end - pos);
            if (!stopwords.contains(word))
                score += idf.idf(word);
            pos = end + 1;
        }
        if (score > best_score) {
            best_score = score;
            best = std::move(normalized);
        }
    }
    if (best.empty())
        return std::nullopt;
    return Query{segment.doc_id, segment.index, std::move(best)};
}

std::vector<std::string> keyword_vocabulary(std::span<const KeywordAssignment> assignments)
{
    std::set<std::string> vocab;
    for (const auto& a : assignments) {
        if (a.keyword)
            vocab.insert(*a.keyword);
    }
    return {vocab.begin(), vocab.end()};
}

CorruptionResult corrupt_keywords(std::span<const KeywordAssignment> assignments, double ratio,
                                  std::span<const std::string> vocabulary, std::uint64_t seed)
{
    if (!(ratio >= 0.0 && ratio <= 1.0))
        throw ConfigError("corruption ratio must lie in [0, 1]");
    if (vocabulary.empty() && ratio > 0.0)
        throw ConfigError("corruption needs a non-empty keyword vocabulary");

    CorruptionResult out;
    out.assignments.assign(assignments.begin(), assignments.end());
    Rng rng(seed);
    for (auto& a : out.assignments) {
        if (!a.keyword)
            continue;
        if (!rng.bernoulli(ratio))
            continue;
        a.keyword = vocabulary[rng.below(vocabulary.size())];
        out.replaced_doc_ids.push_back(a.doc_id);
    }
    return out;
}

void write_queries(std::ostream& out, std::span<const Query> queries)
{
    for (const auto& q : queries)
        out << nlohmann::json{{"doc_id", q.doc_id}, {"segment", q.segment_index}, {"query", q.text}}.dump() << '\n';
}

std::vector<Query> read_queries(std::istream& in)
{
    std::vector<Query> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object())
            throw DataError("query file line " + std::to_string(line_no) + ": malformed record");
        out.push_back({rec.at("doc_id").get<std::string>(), rec.at("segment").get<std::size_t>(),
                       rec.at("query").get<std::string>()});
    }
    return out;
}

} // namespace quest
