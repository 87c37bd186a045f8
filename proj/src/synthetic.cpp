#include "quest/synthetic.hpp"

#include "quest/keywords.hpp"
#include "quest/random.hpp"

#include <array>
#include <unordered_set>

namespace quest {

namespace {

constexpr std::array<std::string_view, 18> kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p",
                                                      "r", "s", "t", "v", "z", "br", "kr", "st", "tr"};
constexpr std::array<std::string_view, 6> kVowels = {"a", "e", "i", "o", "u", "ai"};
constexpr std::array<std::string_view, 12> kConnectors = {"the", "of", "and", "in", "with", "for",
                                                          "on", "to", "by", "from", "is", "a"};

class WordFactory {
public:
    explicit WordFactory(std::uint64_t seed) : rng_(seed) {}

    std::string fresh()
    {
        for (;;) {
            std::string w;
            const auto syllables = 2 + rng_.below(3);
            for (std::uint64_t s = 0; s < syllables; ++s) {
                w += kOnsets[rng_.below(kOnsets.size())];
                w += kVowels[rng_.below(kVowels.size())];
            }
            if (!english_stopwords().contains(w) && used_.insert(w).second)
                return w;
        }
    }

    std::vector<std::string> batch(std::size_t n)
    {
        std::vector<std::string> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(fresh());
        return out;
    }

private:
    Rng rng_;
    std::unordered_set<std::string> used_;
};

} // namespace

const std::vector<std::string>& synthetic_domain_names()
{
    static const std::vector<std::string> names = {"ArXiv", "FreeLaw", "Github", "PubMed Central", "Pile-CC",
                                                   "Wikipedia", "StackExchange", "OpenWebText2", "PhilPapers",
                                                   "USPTO"};
    return names;
}

ClusteredCorpus make_clustered_corpus(const ClusteredCorpusParams& params)
{
    WordFactory words(derive_seed(params.seed, 100));
    const auto global = words.batch(params.global_vocabulary);

    struct Cluster {
        std::vector<std::string> common;
        std::vector<std::vector<std::string>> subtopics;
        std::vector<std::string> phrases;
    };
    std::vector<Cluster> clusters(params.clusters);
    ClusteredCorpus out;
    for (auto& c : clusters) {
        c.common = words.batch(params.cluster_vocabulary);
        for (std::size_t s = 0; s < params.subtopics_per_cluster; ++s)
            c.subtopics.push_back(words.batch(params.subtopic_vocabulary));
        for (std::size_t p = 0; p < params.topic_phrases_per_cluster; ++p) {
            // Alternate 2- and 3-word phrases so their RAKE scores differ.
            const auto parts = words.batch(p % 2 == 0 ? 3 : 2);
            std::string phrase;
            for (const auto& w : parts)
                phrase += (phrase.empty() ? "" : " ") + w;
            c.phrases.push_back(phrase);
        }
        out.topic_phrases.push_back(c.phrases);
    }

    Rng rng(derive_seed(params.seed, 200));
    const auto& domains = synthetic_domain_names();
    std::size_t serial = 0;
    for (std::size_t k = 0; k < params.clusters; ++k) {
        const auto& cluster = clusters[k];
        for (std::size_t i = 0; i < params.docs_per_cluster; ++i) {
            const auto& sub = cluster.subtopics[rng.below(cluster.subtopics.size())];
            auto content = [&]() -> const std::string& {
                if (!rng.bernoulli(params.cluster_overlap))
                    return global[rng.below(global.size())];
                return rng.bernoulli(0.5) ? cluster.common[rng.below(cluster.common.size())]
                                          : sub[rng.below(sub.size())];
            };
            auto connector = [&]() { return std::string(kConnectors[rng.below(kConnectors.size())]); };
            auto capitalize = [](std::string s) {
                if (!s.empty() && s[0] >= 'a' && s[0] <= 'z')
                    s[0] = static_cast<char>(s[0] - 'a' + 'A');
                return s;
            };

            // One topic sentence carrying one or two topic phrases, placed
            // among filler sentences of single content words.
            const auto& first = cluster.phrases[rng.below(cluster.phrases.size())];
            std::string topic = "The " + first;
            if (rng.bernoulli(0.5)) {
                const auto& second = cluster.phrases[rng.below(cluster.phrases.size())];
                if (second != first)
                    topic += " and the " + second;
            }
            for (int w = 0; w < 6; ++w)
                topic += " " + connector() + " " + content();
            topic += ".";

            const auto sentences =
                params.min_sentences + rng.below(params.max_sentences - params.min_sentences + 1);
            const auto topic_at = rng.below(sentences);
            std::string text;
            for (std::uint64_t s = 0; s < sentences; ++s) {
                if (!text.empty())
                    text += ' ';
                if (s == topic_at) {
                    text += topic;
                    continue;
                }
                std::string sentence = capitalize(content());
                const auto n = 3 + rng.below(4);
                for (std::uint64_t w = 0; w < n; ++w)
                    sentence += " " + connector() + " " + content();
                text += sentence + ".";
            }

            Document doc;
            doc.id = params.id_prefix + std::to_string(serial++);
            doc.text = std::move(text);
            doc.domain = domains[k % domains.size()];
            out.documents.push_back(std::move(doc));
            out.cluster_of.push_back(k);
        }
    }
    return out;
}

CorpusStore to_store(std::vector<Document> documents, const TokenizerConfig& tokenizer)
{
    const Tokenizer tok(tokenizer);
    for (auto& d : documents)
        d.token_count = tok.count(d.text);
    return CorpusStore(tok.id(), std::move(documents));
}

} // namespace quest
