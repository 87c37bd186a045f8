#pragma once

#include "quest/corpus.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace quest {

// Generator for topic-clustered corpora with recurring multi-word topic
// phrases, so that query keywords group documents of one cluster.
struct ClusteredCorpusParams {
    std::size_t clusters = 20;
    std::size_t docs_per_cluster = 200;
    // Share of content words drawn from the document's own cluster.
    double cluster_overlap = 0.8;
    std::size_t subtopics_per_cluster = 4;
    std::size_t topic_phrases_per_cluster = 6;
    std::size_t cluster_vocabulary = 60;
    std::size_t subtopic_vocabulary = 30;
    std::size_t global_vocabulary = 1500;
    std::size_t min_sentences = 8;
    std::size_t max_sentences = 20;
    std::uint64_t seed = 2024;
    std::string id_prefix = "doc";
};

struct ClusteredCorpus {
    std::vector<Document> documents; // token_count left at 0
    std::vector<std::size_t> cluster_of;
    std::vector<std::vector<std::string>> topic_phrases; // per cluster
};

ClusteredCorpus make_clustered_corpus(const ClusteredCorpusParams& params);

// Domain labels used for clusters (cluster c gets kDomainNames[c % size]).
const std::vector<std::string>& synthetic_domain_names();

// Tokenizes and wraps generated documents in a store.
CorpusStore to_store(std::vector<Document> documents, const TokenizerConfig& tokenizer = {});

} // namespace quest
