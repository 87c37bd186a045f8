#include "quest/keywords.hpp"

#include "quest/errors.hpp"
#include "quest/random.hpp"
#include "quest/tokenizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <map>
#include <unordered_map>

namespace quest {

namespace {

constexpr std::array<std::string_view, 179> kEnglishStopwords = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've", "you'll",
    "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself", "she", "she's",
    "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them", "their", "theirs",
    "themselves", "what", "which", "who", "whom", "this", "that", "that'll", "these", "those", "am",
    "is", "are", "was", "were", "be", "been", "being", "have", "has", "had", "having", "do", "does",
    "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because", "as", "until", "while",
    "of", "at", "by", "for", "with", "about", "against", "between", "into", "through", "during",
    "before", "after", "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over",
    "under", "again", "further", "then", "once", "here", "there", "when", "where", "why", "how",
    "all", "any", "both", "each", "few", "more", "most", "other", "some", "such", "no", "nor", "not",
    "only", "own", "same", "so", "than", "too", "very", "s", "t", "can", "will", "just", "don",
    "don't", "should", "should've", "now", "d", "ll", "m", "o", "re", "ve", "y", "ain", "aren",
    "aren't", "couldn", "couldn't", "didn", "didn't", "doesn", "doesn't", "hadn", "hadn't", "hasn",
    "hasn't", "haven", "haven't", "isn", "isn't", "ma", "mightn", "mightn't", "mustn", "mustn't",
    "needn", "needn't", "shan", "shan't", "shouldn", "shouldn't", "wasn", "wasn't", "weren",
    "weren't", "won", "won't", "wouldn", "wouldn't",
};

constexpr std::array<std::string_view, 21> kPublishedStopKeywords = {
    "best way",       "get rid",           "bad idea",       "good way",         "main differences",
    "valid way",      "following sentence", "two sentences", "better way",       "mean",
    "passage mean",   "following data",    "good idea",      "best ways",        "correct way",
    "sentence mean",  "next word",         "following passage", "part 1",        "current state",
    "following equation",
};

// Boilerplate query phrases of the same kind as the published ones.
constexpr std::array<std::string_view, 10> kExtendedStopKeywords = {
    "following paragraph", "following text", "following statement", "following question",
    "following passage mean", "main idea", "main point", "good example", "best example",
    "different types",
};

bool is_punct_token(std::string_view token)
{
    return !token.empty() && !is_word_byte(static_cast<unsigned char>(token.front()));
}

std::size_t code_points(std::string_view s)
{
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

} // namespace

const PhraseSet& english_stopwords()
{
    static const PhraseSet words = [] {
        PhraseSet out;
        for (auto w : kEnglishStopwords)
            out.emplace(w);
        return out;
    }();
    return words;
}

std::span<const std::string_view> published_stop_keywords() { return kPublishedStopKeywords; }
std::span<const std::string_view> extended_stop_keywords() { return kExtendedStopKeywords; }

PhraseSet default_stop_keywords()
{
    PhraseSet out;
    for (auto p : kPublishedStopKeywords)
        out.insert(normalize_phrase(p));
    for (auto p : kExtendedStopKeywords)
        out.insert(normalize_phrase(p));
    return out;
}

PhraseSet load_phrase_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read phrase file: " + path.string());
    PhraseSet out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.front() == '#')
            continue;
        auto phrase = normalize_phrase(line);
        if (!phrase.empty())
            out.insert(std::move(phrase));
    }
    return out;
}

std::string normalize_phrase(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (is_space_byte(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (!is_word_byte(c))
            continue;
        if (pending_space)
            out.push_back(' ');
        pending_space = false;
        out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : raw);
    }
    return out;
}

std::vector<KeywordCandidate> rake_extract(std::string_view text, const PhraseSet& stopwords,
                                           const RakeOptions& options)
{
    const std::string lowered = ascii_lower(text);
    const Tokenizer tokenizer(TokenizerConfig{"wordpunct"});

    std::vector<std::vector<std::string>> phrases;
    std::vector<std::string> current;
    auto close = [&] {
        if (!current.empty() && (options.max_phrase_words == 0 || current.size() <= options.max_phrase_words))
            phrases.push_back(current);
        current.clear();
    };
    for (const auto& span : tokenizer.tokenize(lowered)) {
        std::string_view token(lowered.data() + span.begin, span.end - span.begin);
        if (is_punct_token(token) || stopwords.contains(std::string(token))) {
            close();
            continue;
        }
        current.emplace_back(token);
    }
    close();

    std::unordered_map<std::string, double> degree;
    std::unordered_map<std::string, double> frequency;
    for (const auto& phrase : phrases) {
        for (const auto& word : phrase) {
            degree[word] += static_cast<double>(phrase.size());
            frequency[word] += 1.0;
        }
    }

    std::map<std::string, double> merged;
    for (const auto& phrase : phrases) {
        double score = 0.0;
        std::string joined;
        for (const auto& word : phrase) {
            score += degree[word] / frequency[word];
            if (!joined.empty())
                joined.push_back(' ');
            joined += word;
        }
        auto [it, inserted] = merged.emplace(std::move(joined), score);
        if (!inserted)
            it->second = std::max(it->second, score);
    }

    std::vector<KeywordCandidate> out;
    out.reserve(merged.size());
    for (auto& [phrase, score] : merged)
        out.push_back({phrase, score});
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    return out;
}

std::vector<KeywordCandidate> filter_keywords(std::span<const KeywordCandidate> candidates,
                                              const PhraseSet& stop_keywords)
{
    std::vector<KeywordCandidate> out;
    for (const auto& cand : candidates) {
        if (cand.score < kMinRakeScore)
            continue;
        auto phrase = normalize_phrase(cand.phrase);
        if (code_points(phrase) < kMinKeywordChars)
            continue;
        if (stop_keywords.contains(phrase))
            continue;
        out.push_back({std::move(phrase), cand.score});
    }
    return out;
}

std::vector<KeywordCandidate> pool_candidates(std::span<const std::vector<KeywordCandidate>> lists)
{
    std::map<std::string, double> merged;
    for (const auto& list : lists) {
        for (const auto& cand : list) {
            auto [it, inserted] = merged.emplace(cand.phrase, cand.score);
            if (!inserted)
                it->second = std::max(it->second, cand.score);
        }
    }
    std::vector<KeywordCandidate> out;
    out.reserve(merged.size());
    for (auto& [phrase, score] : merged)
        out.push_back({phrase, score});
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.score > b.score; });
    return out;
}

SelectionStrategy parse_selection_strategy(std::string_view name)
{
    if (name == "random")
        return SelectionStrategy::random;
    if (name == "max_score")
        return SelectionStrategy::max_score;
    throw ConfigError("unknown keyword selection strategy: " + std::string(name));
}

std::string_view to_string(SelectionStrategy strategy)
{
    return strategy == SelectionStrategy::random ? "random" : "max_score";
}

std::optional<std::string> select_representative(std::span<const KeywordCandidate> candidates,
                                                 SelectionStrategy strategy, std::uint64_t seed)
{
    if (candidates.empty())
        return std::nullopt;
    if (strategy == SelectionStrategy::max_score) {
        const auto best = std::min_element(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
            if (a.score != b.score)
                return a.score > b.score;
            return a.phrase < b.phrase;
        });
        return best->phrase;
    }
    std::vector<std::string_view> phrases;
    phrases.reserve(candidates.size());
    for (const auto& c : candidates)
        phrases.push_back(c.phrase);
    std::sort(phrases.begin(), phrases.end());
    Rng rng(seed);
    return std::string(phrases[rng.below(phrases.size())]);
}

KeywordAssignment assign_keyword(std::string doc_id, std::span<const std::string> queries,
                                 std::uint64_t doc_ordinal, const PhraseSet& stopwords,
                                 const PhraseSet& stop_keywords, const KeywordOptions& options,
                                 KeywordStats* stats)
{
    std::vector<std::vector<KeywordCandidate>> lists;
    lists.reserve(queries.size());
    for (const auto& q : queries)
        lists.push_back(rake_extract(q, stopwords, options.rake));
    const auto pooled = pool_candidates(lists);
    auto kept = filter_keywords(pooled, stop_keywords);

    KeywordAssignment out;
    out.doc_id = std::move(doc_id);
    out.keyword = select_representative(kept, options.strategy, derive_seed(options.seed, doc_ordinal));
    if (stats) {
        stats->extracted += pooled.size();
        stats->kept += kept.size();
        stats->dropped += pooled.size() - kept.size();
        stats->unkeyed += out.keyword ? 0 : 1;
    }
    out.candidates = std::move(kept);
    return out;
}

void write_assignments(std::ostream& out, std::span<const KeywordAssignment> assignments)
{
    for (const auto& a : assignments) {
        nlohmann::json cands = nlohmann::json::array();
        for (const auto& c : a.candidates)
            cands.push_back({{"phrase", c.phrase}, {"score", c.score}});
        nlohmann::json rec = {{"doc_id", a.doc_id}};
        rec["keyword"] = a.keyword ? nlohmann::json(*a.keyword) : nlohmann::json();
        rec["candidates"] = std::move(cands);
        out << rec.dump() << '\n';
    }
}

std::vector<KeywordAssignment> read_assignments(std::istream& in)
{
    std::vector<KeywordAssignment> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const auto rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("doc_id"))
            throw DataError("assignment file line " + std::to_string(line_no) + ": malformed record");
        KeywordAssignment a;
        a.doc_id = rec["doc_id"].get<std::string>();
        if (rec.contains("keyword") && !rec["keyword"].is_null())
            a.keyword = rec["keyword"].get<std::string>();
        if (rec.contains("candidates")) {
            for (const auto& c : rec["candidates"])
                a.candidates.push_back({c.at("phrase").get<std::string>(), c.at("score").get<double>()});
        }
        out.push_back(std::move(a));
    }
    return out;
}

} // namespace quest
