#include "quest/synthesis.hpp"

#include "quest/errors.hpp"
#include "quest/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <istream>
#include <ostream>

namespace quest {

using nlohmann::json;

Method parse_method(std::string_view name)
{
    if (name == "quest")
        return Method::quest;
    if (name == "standard")
        return Method::standard;
    if (name == "knn")
        return Method::knn;
    if (name == "iclm")
        return Method::iclm;
    throw ConfigError("unknown synthesis method: " + std::string(name));
}

KnnStrategy parse_knn_strategy(std::string_view name)
{
    if (name == "top_k")
        return KnnStrategy::top_k;
    if (name == "mid_ranking")
        return KnnStrategy::mid_ranking;
    if (name == "random_sampling")
        return KnnStrategy::random_sampling;
    if (name == "reverse_order")
        return KnnStrategy::reverse_order;
    throw ConfigError("unknown knn strategy: " + std::string(name));
}

Replacement parse_replacement(std::string_view name)
{
    if (name == "without")
        return Replacement::without;
    if (name == "refill")
        return Replacement::refill;
    throw ConfigError("unknown replacement mode: " + std::string(name));
}

std::string_view to_string(Method m)
{
    switch (m) {
    case Method::quest: return "quest";
    case Method::standard: return "standard";
    case Method::knn: return "knn";
    case Method::iclm: return "iclm";
    }
    return "?";
}

std::string_view to_string(KnnStrategy s)
{
    switch (s) {
    case KnnStrategy::top_k: return "top_k";
    case KnnStrategy::mid_ranking: return "mid_ranking";
    case KnnStrategy::random_sampling: return "random_sampling";
    case KnnStrategy::reverse_order: return "reverse_order";
    }
    return "?";
}

std::string_view to_string(Replacement r) { return r == Replacement::without ? "without" : "refill"; }

std::string_view to_string(SplitSet s)
{
    switch (s) {
    case SplitSet::none: return "none";
    case SplitSet::short_set: return "short";
    case SplitSet::long_set: return "long";
    }
    return "?";
}

std::uint64_t separator_tokens(const SynthesisConfig& config, const CorpusStore& corpus)
{
    const std::string id = corpus.tokenizer_id().empty() ? "wordpunct" : corpus.tokenizer_id();
    return Tokenizer(TokenizerConfig{id}).count(config.separator);
}

namespace {

void validate(const SynthesisConfig& config)
{
    if (config.length == 0)
        throw ConfigError("context length must be >= 1");
}

// Fills one sample up to exactly `length` tokens, separators included.
class Assembler {
public:
    Assembler(Method method, std::uint64_t length, std::uint64_t separator)
        : method_(method), length_(length), separator_(separator)
    {
        reset();
    }

    bool full() const { return used_ == length_; }
    std::uint64_t remaining() const { return length_ - used_; }

    // When only separator room is left, the separator tail closes the sample.
    bool close_with_separator()
    {
        if (sample_.slices.empty() || full() || remaining() > separator_)
            return false;
        sample_.closing_separator_tokens = remaining();
        used_ = length_;
        return true;
    }
    bool empty() const { return sample_.slices.empty(); }
    const ContextSample& sample() const { return sample_; }
    ContextSample& sample() { return sample_; }

    // Appends up to `available` tokens of `doc` from `offset`. Returns the
    // number of document tokens taken; 0 means a separator closed the sample.
    std::uint64_t add(DocIndex doc, std::uint64_t offset, std::uint64_t available)
    {
        if (!sample_.slices.empty()) {
            const auto sep = std::min(separator_, length_ - used_);
            used_ += sep;
            if (used_ == length_) {
                sample_.closing_separator_tokens = sep;
                return 0;
            }
        }
        const auto take = std::min(available, length_ - used_);
        sample_.slices.push_back({doc, offset, take});
        used_ += take;
        if (take < available)
            sample_.truncated_tail = true;
        return take;
    }

    ContextSample finish()
    {
        sample_.token_count = used_;
        ContextSample out = std::move(sample_);
        reset();
        return out;
    }

    void reset()
    {
        sample_ = ContextSample{};
        sample_.method = method_;
        used_ = 0;
    }

private:
    Method method_;
    std::uint64_t length_;
    std::uint64_t separator_;
    std::uint64_t used_ = 0;
    ContextSample sample_;
};

// Chunks a document order into consecutive exactly-L samples; documents may
// straddle sample boundaries.
class StreamChunker {
public:
    StreamChunker(Method method, const CorpusStore& corpus, const SynthesisConfig& config, const SampleSink& sink,
                  SynthesisReport& report)
        : corpus_(corpus), sink_(sink), report_(report),
          assembler_(method, config.length, separator_tokens(config, corpus))
    {
    }

    void feed(DocIndex doc)
    {
        const auto tokens = corpus_[doc].token_count;
        std::uint64_t offset = 0;
        while (offset < tokens) {
            offset += assembler_.add(doc, offset, tokens - offset);
            if (assembler_.full()) {
                if (offset < tokens)
                    assembler_.sample().truncated_tail = true;
                sink_(assembler_.finish());
                ++report_.samples;
            }
        }
    }

    void finish()
    {
        if (!assembler_.empty()) {
            std::uint64_t partial = 0;
            for (const auto& s : assembler_.sample().slices)
                partial += s.tokens;
            report_.leftover_tokens += partial;
        }
        assembler_.reset();
    }

private:
    const CorpusStore& corpus_;
    const SampleSink& sink_;
    SynthesisReport& report_;
    Assembler assembler_;
};

// Remaining documents of one split set, organized by bucket.
class SetPool {
public:
    SetPool(const InvertedIndex& index, std::span<const std::size_t> buckets, const CorpusStore& corpus)
        : index_(index), buckets_(buckets.begin(), buckets.end()), corpus_(corpus)
    {
        refill();
    }

    void refill()
    {
        remaining_.clear();
        active_.clear();
        mass_ = 0;
        for (std::size_t i = 0; i < buckets_.size(); ++i) {
            std::vector<DocIndex> docs;
            for (auto d : index_.buckets()[buckets_[i]].docs) {
                if (corpus_[d].token_count > 0) {
                    docs.push_back(d);
                    mass_ += corpus_[d].token_count;
                }
            }
            remaining_.push_back(std::move(docs));
            if (!remaining_.back().empty())
                active_.push_back(i);
        }
    }

    bool exhausted() const { return active_.empty(); }
    std::uint64_t mass() const { return mass_; }

    // Uniform draw over non-exhausted buckets; returns the local bucket slot.
    std::size_t draw_bucket(Rng& rng) const { return active_[rng.below(active_.size())]; }

    const std::string& keyword(std::size_t slot) const { return index_.buckets()[buckets_[slot]].keyword; }
    bool bucket_empty(std::size_t slot) const { return remaining_[slot].empty(); }

    // Uniform draw without replacement from one bucket.
    DocIndex take(std::size_t slot, Rng& rng)
    {
        auto& docs = remaining_[slot];
        const auto j = static_cast<std::size_t>(rng.below(docs.size()));
        const DocIndex d = docs[j];
        docs[j] = docs.back();
        docs.pop_back();
        mass_ -= corpus_[d].token_count;
        if (docs.empty())
            active_.erase(std::find(active_.begin(), active_.end(), slot));
        return d;
    }

private:
    const InvertedIndex& index_;
    std::vector<std::size_t> buckets_;
    const CorpusStore& corpus_;
    std::vector<std::vector<DocIndex>> remaining_;
    std::vector<std::size_t> active_; // slots with documents left, ascending
    std::uint64_t mass_ = 0;
};

void require_embeddings(const CorpusStore& corpus, const EmbeddingMatrix<double>& embeddings)
{
    if (embeddings.size() != corpus.size())
        throw DataError("embedding matrix does not cover the corpus");
    for (DocIndex d = 0; d < corpus.size(); ++d) {
        if (!embeddings.present(d) || embeddings.id(d) != corpus[d].id)
            throw DataError("missing embedding for document: " + corpus[d].id);
    }
}

} // namespace

SynthesisReport synth_quest(const InvertedIndex& index, const IndexSplit& split, const CorpusStore& corpus,
                            const SynthesisConfig& config, const SamplePlan& plan, const SampleSink& sink)
{
    validate(config);
    SynthesisReport report;
    const auto sep = separator_tokens(config, corpus);
    Rng rng(derive_seed(config.seed, 1));

    SetPool pools[2] = {SetPool(index, split.short_set, corpus), SetPool(index, split.long_set, corpus)};
    const SplitSet labels[2] = {SplitSet::short_set, SplitSet::long_set};
    std::uint64_t quota[2] = {plan.short_samples, plan.long_samples};
    bool dead[2] = {false, false};
    for (int s = 0; s < 2; ++s) {
        if (pools[s].exhausted())
            dead[s] = true;
    }

    report.unkeyed_excluded = index.pool().size();

    while (quota[0] + quota[1] > 0) {
        for (int s = 0; s < 2; ++s) {
            if (dead[s] && quota[s] > 0) {
                report.shortfall += quota[s];
                quota[s] = 0;
            }
        }
        if (quota[0] + quota[1] == 0)
            break;
        const int s = rng.below(quota[0] + quota[1]) < quota[0] ? 0 : 1;
        auto& pool = pools[s];

        if (config.replacement == Replacement::refill && pool.mass() < config.length) {
            pool.refill();
            ++report.refills;
            if (pool.mass() < config.length) {
                dead[s] = true;
                continue;
            }
        }
        if (pool.exhausted()) {
            dead[s] = true;
            continue;
        }

        Assembler assembler(Method::quest, config.length, sep);
        assembler.sample().split_set = labels[s];
        bool completed = false;
        while (!completed && !pool.exhausted()) {
            const auto slot = pool.draw_bucket(rng);
            assembler.sample().keyword_trace.push_back(pool.keyword(slot));
            while (!pool.bucket_empty(slot)) {
                if (assembler.close_with_separator()) {
                    completed = true;
                    break;
                }
                const auto doc = pool.take(slot, rng);
                assembler.add(doc, 0, corpus[doc].token_count);
                if (assembler.full()) {
                    completed = true;
                    break;
                }
            }
        }
        if (!completed) {
            report.discarded_docs += assembler.sample().slices.size();
            dead[s] = true;
            continue;
        }
        sink(assembler.finish());
        --quota[s];
        ++report.samples;
        ++(s == 0 ? report.short_samples : report.long_samples);
    }

    if (config.unkeyed_filler && !index.pool().empty()) {
        SynthesisReport filler;
        StreamChunker chunker(Method::standard, corpus, config, sink, filler);
        std::vector<DocIndex> order(index.pool().begin(), index.pool().end());
        Rng filler_rng(derive_seed(config.seed, 5));
        filler_rng.shuffle(std::span<DocIndex>(order));
        for (auto d : order)
            chunker.feed(d);
        chunker.finish();
        report.filler_samples = filler.samples;
        report.samples += filler.samples;
        report.leftover_tokens += filler.leftover_tokens;
        report.unkeyed_excluded = 0;
    }
    return report;
}

SynthesisReport synth_standard(const CorpusStore& corpus, const SynthesisConfig& config, const SampleSink& sink)
{
    validate(config);
    SynthesisReport report;
    std::vector<DocIndex> order(corpus.size());
    for (DocIndex d = 0; d < corpus.size(); ++d)
        order[d] = d;
    Rng rng(derive_seed(config.seed, 2));
    rng.shuffle(std::span<DocIndex>(order));

    StreamChunker chunker(Method::standard, corpus, config, sink, report);
    for (auto d : order)
        chunker.feed(d);
    chunker.finish();
    return report;
}

std::vector<DocIndex> knn_candidate_order(std::span<const Neighbor> ranking, KnnStrategy strategy, Rng& rng)
{
    std::vector<DocIndex> order;
    order.reserve(ranking.size());
    for (const auto& n : ranking)
        order.push_back(n.doc);
    switch (strategy) {
    case KnnStrategy::top_k:
    case KnnStrategy::reverse_order:
        break;
    case KnnStrategy::mid_ranking: {
        const auto center = static_cast<std::ptrdiff_t>(ranking.size() / 2);
        std::vector<std::size_t> ranks(ranking.size());
        for (std::size_t i = 0; i < ranks.size(); ++i)
            ranks[i] = i;
        std::stable_sort(ranks.begin(), ranks.end(), [&](std::size_t a, std::size_t b) {
            return std::abs(static_cast<std::ptrdiff_t>(a) - center) < std::abs(static_cast<std::ptrdiff_t>(b) - center);
        });
        for (std::size_t i = 0; i < ranks.size(); ++i)
            order[i] = ranking[ranks[i]].doc;
        break;
    }
    case KnnStrategy::random_sampling:
        rng.shuffle(std::span<DocIndex>(order));
        break;
    }
    return order;
}

SynthesisReport synth_knn(const CorpusStore& corpus, const EmbeddingMatrix<double>& embeddings,
                          const SynthesisConfig& config, const SampleSink& sink)
{
    validate(config);
    require_embeddings(corpus, embeddings);
    SynthesisReport report;
    const auto sep = separator_tokens(config, corpus);

    std::vector<DocIndex> seeds;
    for (DocIndex d = 0; d < corpus.size(); ++d) {
        if (embeddings.retrievable(d) && corpus[d].token_count > 0)
            seeds.push_back(d);
    }
    Rng rng(derive_seed(config.seed, 3));
    rng.shuffle(std::span<DocIndex>(seeds));

    const std::uint64_t wanted = config.num_samples > 0 ? config.num_samples : corpus.total_tokens() / config.length;
    std::vector<std::uint32_t> uses(corpus.size(), 0);
    std::size_t next_seed = 0;
    while (report.samples < wanted && next_seed < seeds.size()) {
        const DocIndex seed = seeds[next_seed++];
        auto ranking = knn_query(embeddings, seed, corpus.size());
        std::erase_if(ranking, [&](const Neighbor& n) { return corpus[n.doc].token_count == 0; });

        std::vector<DocIndex> order;
        if (config.knn_strategy == KnnStrategy::random_sampling || config.knn_strategy == KnnStrategy::mid_ranking) {
            order = knn_candidate_order(ranking, config.knn_strategy, rng);
        } else {
            order = knn_candidate_order(ranking, KnnStrategy::top_k, rng);
        }
        if (config.knn_k > 0 && order.size() > config.knn_k)
            order.resize(config.knn_k);

        // The k-capped ranking walked least similar first.
        if (config.knn_strategy == KnnStrategy::reverse_order)
            std::reverse(order.begin(), order.end());

        Assembler assembler(Method::knn, config.length, sep);
        assembler.add(seed, 0, corpus[seed].token_count);
        for (std::size_t i = 0; i < order.size() && !assembler.full(); ++i)
            assembler.add(order[i], 0, corpus[order[i]].token_count);
        if (!assembler.full())
            assembler.close_with_separator();
        if (!assembler.full()) {
            ++report.shortfall;
            continue;
        }
        auto sample = assembler.finish();
        for (const auto& s : sample.slices)
            ++uses[s.doc];
        sink(sample);
        ++report.samples;
    }
    if (report.samples < wanted)
        report.shortfall += wanted - report.samples;
    for (auto u : uses)
        report.reused_neighbors += u > 1 ? 1 : 0;
    return report;
}

std::vector<DocIndex> greedy_path(std::span<const std::vector<DocIndex>> neighbors, DocIndex start, Rng& rng)
{
    const std::size_t n = neighbors.size();
    if (n == 0)
        return {};
    if (start >= n)
        throw DomainError("greedy_path: start outside the graph");

    // Unvisited nodes with O(1) removal and uniform draws.
    std::vector<DocIndex> unvisited(n);
    std::vector<std::size_t> where(n);
    for (std::size_t i = 0; i < n; ++i) {
        unvisited[i] = static_cast<DocIndex>(i);
        where[i] = i;
    }
    std::vector<bool> visited(n, false);
    auto visit = [&](DocIndex d) {
        visited[d] = true;
        const auto at = where[d];
        const auto last = unvisited.back();
        unvisited[at] = last;
        where[last] = at;
        unvisited.pop_back();
    };

    std::vector<DocIndex> path;
    path.reserve(n);
    DocIndex current = start;
    visit(current);
    path.push_back(current);
    while (!unvisited.empty()) {
        std::optional<DocIndex> next;
        for (auto cand : neighbors[current]) {
            if (!visited[cand]) {
                next = cand;
                break;
            }
        }
        if (!next)
            next = unvisited[rng.below(unvisited.size())];
        current = *next;
        visit(current);
        path.push_back(current);
    }
    return path;
}

SynthesisReport synth_iclm(const CorpusStore& corpus, const EmbeddingMatrix<double>& embeddings,
                           const SynthesisConfig& config, const SampleSink& sink)
{
    validate(config);
    if (config.iclm_degree == 0)
        throw ConfigError("iclm graph degree must be >= 1");
    require_embeddings(corpus, embeddings);

    std::vector<std::vector<DocIndex>> graph(corpus.size());
    for (DocIndex d = 0; d < corpus.size(); ++d) {
        if (!embeddings.retrievable(d))
            continue;
        for (const auto& nb : knn_query(embeddings, d, config.iclm_degree))
            graph[d].push_back(nb.doc);
    }

    SynthesisReport report;
    if (corpus.empty())
        return report;
    Rng rng(derive_seed(config.seed, 4));
    const auto start = static_cast<DocIndex>(rng.below(corpus.size()));
    const auto path = greedy_path(graph, start, rng);

    StreamChunker chunker(Method::iclm, corpus, config, sink, report);
    for (auto d : path)
        chunker.feed(d);
    chunker.finish();
    return report;
}

std::vector<std::string> sample_doc_ids(const ContextSample& sample, const CorpusStore& corpus)
{
    std::vector<std::string> ids;
    ids.reserve(sample.slices.size());
    for (const auto& s : sample.slices)
        ids.push_back(corpus[s.doc].id);
    return ids;
}

std::string sample_text(const ContextSample& sample, const CorpusStore& corpus, const SynthesisConfig& config)
{
    const Tokenizer tokenizer(TokenizerConfig{corpus.tokenizer_id().empty() ? "wordpunct" : corpus.tokenizer_id()});
    std::string out;
    for (std::size_t i = 0; i < sample.slices.size(); ++i) {
        if (i > 0)
            out += config.separator;
        const auto& slice = sample.slices[i];
        const auto& text = corpus[slice.doc].text;
        const auto spans = tokenizer.tokenize(text);
        const auto first = std::min<std::uint64_t>(slice.begin, spans.size());
        const auto last = std::min<std::uint64_t>(slice.begin + slice.tokens, spans.size());
        const std::size_t b = first == 0 ? 0 : spans[first].begin;
        const std::size_t e = last == spans.size() ? text.size() : spans[last - 1].end;
        if (e > b && last > first)
            out.append(text, b, e - b);
    }
    if (sample.closing_separator_tokens > 0)
        out.append(config.separator, 0, token_prefix_end(config.separator, sample.closing_separator_tokens, tokenizer));
    return out;
}

SampleWriter::SampleWriter(std::ostream& out, const CorpusStore& corpus, const SynthesisConfig& config,
                           bool emit_text)
    : out_(out), corpus_(corpus), config_(config), emit_text_(emit_text)
{
}

void SampleWriter::write(const ContextSample& sample)
{
    json spans = json::array();
    for (const auto& s : sample.slices)
        spans.push_back({s.begin, s.tokens});
    json rec = {
        {"method", to_string(sample.method)},
        {"doc_ids", sample_doc_ids(sample, corpus_)},
        {"keyword_trace", sample.keyword_trace},
        {"token_count", sample.token_count},
        {"truncated_tail", sample.truncated_tail},
        {"spans", std::move(spans)},
    };
    if (sample.split_set != SplitSet::none)
        rec["split_set"] = to_string(sample.split_set);
    if (emit_text_)
        rec["text"] = sample_text(sample, corpus_, config_);
    out_ << rec.dump() << '\n';
}

std::vector<ContextSample> read_samples(std::istream& in, const CorpusStore& corpus)
{
    std::vector<ContextSample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        const json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object())
            throw DataError("sample file line " + std::to_string(line_no) + ": malformed record");
        ContextSample s;
        s.method = parse_method(rec.at("method").get<std::string>());
        const auto& ids = rec.at("doc_ids");
        const auto& spans = rec.at("spans");
        if (ids.size() != spans.size())
            throw DataError("sample file line " + std::to_string(line_no) + ": doc_ids and spans disagree");
        for (std::size_t i = 0; i < ids.size(); ++i) {
            s.slices.push_back({corpus.index_of(ids[i].get<std::string>()), spans[i].at(0).get<std::uint64_t>(),
                                spans[i].at(1).get<std::uint64_t>()});
        }
        s.keyword_trace = rec.at("keyword_trace").get<std::vector<std::string>>();
        s.token_count = rec.at("token_count").get<std::uint64_t>();
        s.truncated_tail = rec.at("truncated_tail").get<bool>();
        if (auto it = rec.find("split_set"); it != rec.end())
            s.split_set = it->get<std::string>() == "short" ? SplitSet::short_set : SplitSet::long_set;
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace quest
