#pragma once

#include "quest/corpus.hpp"
#include "quest/embeddings.hpp"
#include "quest/index.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace quest {

enum class Method { quest, standard, knn, iclm };
enum class KnnStrategy { top_k, mid_ranking, random_sampling, reverse_order };
// without: documents are consumed once per run. refill: an exhausted split
// set starts a fresh pass over its buckets (needed for oversampling past a
// set's capacity).
enum class Replacement { without, refill };
enum class SplitSet { none, short_set, long_set };

Method parse_method(std::string_view name);
KnnStrategy parse_knn_strategy(std::string_view name);
Replacement parse_replacement(std::string_view name);
std::string_view to_string(Method m);
std::string_view to_string(KnnStrategy s);
std::string_view to_string(Replacement r);
std::string_view to_string(SplitSet s);

// Tokens [begin, begin + tokens) of one document.
struct Slice {
    DocIndex doc = 0;
    std::uint64_t begin = 0;
    std::uint64_t tokens = 0;

    friend bool operator==(const Slice&, const Slice&) = default;
};

struct ContextSample {
    Method method = Method::standard;
    std::vector<Slice> slices;
    std::vector<std::string> keyword_trace; // quest only
    SplitSet split_set = SplitSet::none;
    std::uint64_t token_count = 0;
    // The final document did not fit and was cut.
    bool truncated_tail = false;
    // Token count of a separator tail that closed the sample (0 normally).
    std::uint64_t closing_separator_tokens = 0;

    friend bool operator==(const ContextSample&, const ContextSample&) = default;
};

inline constexpr std::string_view kDefaultSeparator = "\n\n<|endofdoc|>\n\n";

struct SynthesisConfig {
    std::uint64_t length = 32768;
    std::uint64_t seed = 0;
    std::string separator = std::string(kDefaultSeparator);
    // 0 selects a method default (quest: n_s + n_l, knn: total tokens / L).
    std::uint64_t num_samples = 0;
    Replacement replacement = Replacement::without;
    bool unkeyed_filler = false;
    KnnStrategy knn_strategy = KnnStrategy::top_k;
    std::size_t knn_k = 0; // neighbors considered per seed, 0 = unlimited
    std::size_t iclm_degree = 8;
};

struct SynthesisReport {
    std::uint64_t samples = 0;
    std::uint64_t short_samples = 0;
    std::uint64_t long_samples = 0;
    std::uint64_t shortfall = 0;          // planned samples that could not be built
    std::uint64_t discarded_docs = 0;     // consumed by a sample that could not be completed
    std::uint64_t unkeyed_excluded = 0;
    std::uint64_t filler_samples = 0;
    std::uint64_t leftover_tokens = 0;    // tail of the chunked stream shorter than L
    std::uint64_t refills = 0;
    std::uint64_t reused_neighbors = 0;   // knn: documents emitted in more than one sample
};

using SampleSink = std::function<void(const ContextSample&)>;

// Separator cost in the corpus tokenizer.
std::uint64_t separator_tokens(const SynthesisConfig& config, const CorpusStore& corpus);

SynthesisReport synth_quest(const InvertedIndex& index, const IndexSplit& split, const CorpusStore& corpus,
                            const SynthesisConfig& config, const SamplePlan& plan, const SampleSink& sink);

SynthesisReport synth_standard(const CorpusStore& corpus, const SynthesisConfig& config, const SampleSink& sink);

SynthesisReport synth_knn(const CorpusStore& corpus, const EmbeddingMatrix<double>& embeddings,
                          const SynthesisConfig& config, const SampleSink& sink);

SynthesisReport synth_iclm(const CorpusStore& corpus, const EmbeddingMatrix<double>& embeddings,
                           const SynthesisConfig& config, const SampleSink& sink);

// Candidate order a KNN strategy walks for one seed, given the full
// descending ranking. reverse_order reverses the ranking after the knn_k cap,
// so it is handled inside synth_knn; here it returns the ranking unchanged.
std::vector<DocIndex> knn_candidate_order(std::span<const Neighbor> ranking, KnnStrategy strategy, Rng& rng);

// Greedy walk: from `start`, move to the most similar unvisited neighbor,
// jumping to a uniformly drawn unvisited node when none is left. Returns a
// permutation of [0, neighbors.size()).
std::vector<DocIndex> greedy_path(std::span<const std::vector<DocIndex>> neighbors, DocIndex start, Rng& rng);

// Collects a sink into a vector.
struct SampleCollector {
    std::vector<ContextSample> samples;
    SampleSink sink()
    {
        return [this](const ContextSample& s) { samples.push_back(s); };
    }
};

std::vector<std::string> sample_doc_ids(const ContextSample& sample, const CorpusStore& corpus);

// Concatenated text of the sample, separators included.
std::string sample_text(const ContextSample& sample, const CorpusStore& corpus, const SynthesisConfig& config);

// One JSON object per line:
// {"method","doc_ids","keyword_trace","token_count","truncated_tail","spans","split_set"?,"text"?}
class SampleWriter {
public:
    SampleWriter(std::ostream& out, const CorpusStore& corpus, const SynthesisConfig& config, bool emit_text);
    void write(const ContextSample& sample);
    SampleSink sink()
    {
        return [this](const ContextSample& s) { write(s); };
    }

private:
    std::ostream& out_;
    const CorpusStore& corpus_;
    const SynthesisConfig& config_;
    bool emit_text_;
};

std::vector<ContextSample> read_samples(std::istream& in, const CorpusStore& corpus);

} // namespace quest
