#include "quest/index.hpp"

#include "quest/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace quest {

using nlohmann::json;

InvertedIndex::InvertedIndex(std::vector<Bucket> buckets, std::vector<DocIndex> pool)
    : buckets_(std::move(buckets)), pool_(std::move(pool))
{
    std::sort(buckets_.begin(), buckets_.end(), [](const auto& a, const auto& b) { return a.keyword < b.keyword; });
    DocIndex max_doc = 0;
    for (const auto& b : buckets_) {
        for (auto d : b.docs)
            max_doc = std::max(max_doc, d);
    }
    for (auto d : pool_)
        max_doc = std::max(max_doc, d);
    bucket_of_doc_.assign(static_cast<std::size_t>(max_doc) + 1, -1);
    for (std::size_t i = 0; i < buckets_.size(); ++i) {
        for (auto d : buckets_[i].docs)
            bucket_of_doc_[d] = static_cast<std::int64_t>(i);
    }
}

const Bucket* InvertedIndex::find(std::string_view keyword) const
{
    auto it = std::lower_bound(buckets_.begin(), buckets_.end(), keyword,
                               [](const Bucket& b, std::string_view k) { return b.keyword < k; });
    if (it == buckets_.end() || it->keyword != keyword)
        return nullptr;
    return &*it;
}

std::optional<std::size_t> InvertedIndex::bucket_of(DocIndex doc) const
{
    if (doc >= bucket_of_doc_.size() || bucket_of_doc_[doc] < 0)
        return std::nullopt;
    return static_cast<std::size_t>(bucket_of_doc_[doc]);
}

InvertedIndex build_index(std::span<const KeywordAssignment> assignments, const CorpusStore& corpus)
{
    std::vector<const std::string*> keyword_of(corpus.size(), nullptr);
    std::vector<bool> assigned(corpus.size(), false);
    for (const auto& a : assignments) {
        auto doc = corpus.find(a.doc_id);
        if (!doc)
            throw DataError("keyword assignment references unknown document: " + a.doc_id);
        if (assigned[*doc])
            throw DataError("document assigned twice: " + a.doc_id);
        assigned[*doc] = true;
        if (a.keyword)
            keyword_of[*doc] = &*a.keyword;
    }

    std::map<std::string, Bucket> grouped;
    std::vector<DocIndex> pool;
    for (DocIndex d = 0; d < corpus.size(); ++d) {
        if (!keyword_of[d]) {
            pool.push_back(d);
            continue;
        }
        auto& bucket = grouped[*keyword_of[d]];
        bucket.docs.push_back(d);
        bucket.token_mass += corpus[d].token_count;
    }
    std::vector<Bucket> buckets;
    buckets.reserve(grouped.size());
    for (auto& [keyword, bucket] : grouped) {
        bucket.keyword = keyword;
        buckets.push_back(std::move(bucket));
    }
    return InvertedIndex(std::move(buckets), std::move(pool));
}

std::vector<std::size_t> size_order(const InvertedIndex& index)
{
    const auto& buckets = index.buckets();
    std::vector<std::size_t> order(buckets.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    // Buckets are keyword-sorted, so a stable sort on size breaks ties lexicographically.
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return buckets[a].docs.size() < buckets[b].docs.size(); });
    return order;
}

IndexSplit split_index(const InvertedIndex& index, double split_ratio, std::uint64_t context_length)
{
    if (!(split_ratio >= 0.0 && split_ratio <= 1.0))
        throw DomainError("split ratio must lie in [0, 1]");
    if (context_length == 0)
        throw DomainError("context length must be >= 1");

    IndexSplit split;
    split.split_ratio = split_ratio;
    split.context_length = context_length;
    const auto order = size_order(index);
    const auto cut = static_cast<std::size_t>(std::llround(split_ratio * static_cast<double>(order.size())));
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const auto pos = order[rank];
        const auto mass = index.buckets()[pos].token_mass;
        if (rank < cut) {
            split.short_set.push_back(pos);
            split.short_mass += mass;
        } else {
            split.long_set.push_back(pos);
            split.long_mass += mass;
        }
    }
    split.n_short = split.short_mass / context_length;
    split.n_long = split.long_mass / context_length;
    return split;
}

SamplePlan plan_samples(std::uint64_t n_short, std::uint64_t n_long, double p, std::uint64_t total)
{
    if (n_short == 0 && n_long == 0)
        throw DomainError("plan_samples: both sets have zero capacity");
    if (!(p >= 0.0) || !std::isfinite(p))
        throw DomainError("plan_samples: oversampling probability must be >= 0");
    if (total == 0)
        throw DomainError("plan_samples: total samples must be >= 1");

    SamplePlan plan{p, total, 0, total};
    if (n_short == 0)
        return plan;

    const double share = static_cast<double>(n_short) / static_cast<double>(n_short + n_long);
    const double x = (share + p) * static_cast<double>(total);
    const double nearest = std::round(x);
    double short_samples = std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x)) ? nearest : std::ceil(x);
    short_samples = std::min(short_samples, static_cast<double>(total));
    plan.short_samples = static_cast<std::uint64_t>(short_samples);
    plan.long_samples = total - plan.short_samples;
    return plan;
}

double equalizing_p(std::size_t short_keywords, std::size_t long_keywords, std::uint64_t n_short,
                    std::uint64_t n_long)
{
    if (short_keywords == 0 || long_keywords == 0)
        throw DomainError("equalizing_p: both split sets must be non-empty");
    if (n_short + n_long == 0)
        throw DomainError("equalizing_p: both split sets have zero capacity");
    const double keyword_share =
        static_cast<double>(short_keywords) / static_cast<double>(short_keywords + long_keywords);
    const double sample_share = static_cast<double>(n_short) / static_cast<double>(n_short + n_long);
    return std::max(0.0, keyword_share - sample_share);
}

double equalizing_p(const IndexSplit& split)
{
    return equalizing_p(split.short_set.size(), split.long_set.size(), split.n_short, split.n_long);
}

void write_index(const InvertedIndex& index, const IndexSplit& split, double oversample_p,
                 bool p_automatic, const CorpusStore& corpus, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    const auto& buckets = index.buckets();
    json keywords = json::array();
    for (const auto& b : buckets)
        keywords.push_back({{"keyword", b.keyword}, {"size", b.docs.size()}, {"token_mass", b.token_mass}});
    json short_set = json::array();
    json long_set = json::array();
    for (auto pos : split.short_set)
        short_set.push_back(buckets[pos].keyword);
    for (auto pos : split.long_set)
        long_set.push_back(buckets[pos].keyword);

    json manifest = {
        {"format", "quest-weaver/index-v1"},
        {"keywords", std::move(keywords)},
        {"unkeyed", index.pool().size()},
        {"buckets", "buckets.jsonl"},
        {"split",
         {{"ratio", split.split_ratio},
          {"context_length", split.context_length},
          {"short", std::move(short_set)},
          {"long", std::move(long_set)},
          {"short_mass", split.short_mass},
          {"long_mass", split.long_mass},
          {"n_short", split.n_short},
          {"n_long", split.n_long}}},
        {"oversample_p", oversample_p},
        {"oversample_mode", p_automatic ? "auto" : "fixed"},
    };
    {
        std::ofstream out(dir / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << '\n';
    }
    std::ofstream out(dir / "buckets.jsonl", std::ios::binary);
    for (const auto& b : buckets) {
        json ids = json::array();
        for (auto d : b.docs)
            ids.push_back(corpus[d].id);
        out << json{{"keyword", b.keyword}, {"doc_ids", std::move(ids)}}.dump() << '\n';
    }
    json pool = json::array();
    for (auto d : index.pool())
        pool.push_back(corpus[d].id);
    out << json{{"keyword", nullptr}, {"doc_ids", std::move(pool)}}.dump() << '\n';
}

StoredIndex read_index(const std::filesystem::path& dir, const CorpusStore& corpus)
{
    std::ifstream mf(dir / "manifest.json");
    if (!mf)
        throw DataError("missing index manifest in " + dir.string());
    const json manifest = json::parse(mf);
    if (manifest.value("format", "") != "quest-weaver/index-v1")
        throw DataError("unsupported index format in " + dir.string());

    std::ifstream in(dir / manifest.at("buckets").get<std::string>());
    if (!in)
        throw DataError("missing index bucket file in " + dir.string());
    std::vector<Bucket> buckets;
    std::vector<DocIndex> pool;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const json rec = json::parse(line);
        std::vector<DocIndex> docs;
        std::uint64_t mass = 0;
        for (const auto& id : rec.at("doc_ids")) {
            const auto d = corpus.index_of(id.get<std::string>());
            docs.push_back(d);
            mass += corpus[d].token_count;
        }
        if (rec.at("keyword").is_null())
            pool = std::move(docs);
        else
            buckets.push_back({rec.at("keyword").get<std::string>(), std::move(docs), mass});
    }

    StoredIndex out;
    out.index = InvertedIndex(std::move(buckets), std::move(pool));
    out.split_ratio = manifest.at("split").at("ratio").get<double>();
    out.context_length = manifest.at("split").at("context_length").get<std::uint64_t>();
    if (manifest.contains("oversample_mode") && manifest.at("oversample_mode") == "auto")
        out.oversample_p = std::nullopt;
    else
        out.oversample_p = manifest.at("oversample_p").get<double>();
    return out;
}

} // namespace quest
