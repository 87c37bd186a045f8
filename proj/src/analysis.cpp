#include "quest/analysis.hpp"

#include "quest/errors.hpp"
#include "quest/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace quest {

double pairwise_sum(std::span<const double> values)
{
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values)
            s += v;
        return s;
    }
    const auto half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::optional<double> context_similarity(const ContextSample& sample, const EmbeddingMatrix<double>& matrix)
{
    std::vector<DocIndex> members;
    for (const auto& s : sample.slices) {
        if (s.doc < matrix.size() && matrix.retrievable(s.doc) &&
            std::find(members.begin(), members.end(), s.doc) == members.end())
            members.push_back(s.doc);
    }
    if (members.size() < 2)
        return std::nullopt;
    std::vector<double> pairs;
    pairs.reserve(members.size() * (members.size() - 1) / 2);
    for (std::size_t i = 0; i < members.size(); ++i) {
        for (std::size_t j = i + 1; j < members.size(); ++j)
            pairs.push_back(matrix.similarity(members[i], members[j]));
    }
    return pairwise_sum(pairs) / static_cast<double>(pairs.size());
}

SimilarityStats similarity_stats(std::span<const ContextSample> samples, const EmbeddingMatrix<double>& matrix,
                                 std::uint64_t seed)
{
    std::vector<std::size_t> chosen(samples.size());
    for (std::size_t i = 0; i < chosen.size(); ++i)
        chosen[i] = i;
    if (chosen.size() > kSimilaritySubsampleAbove) {
        Rng rng(derive_seed(seed, 11));
        rng.shuffle(std::span<std::size_t>(chosen));
        chosen.resize(kSimilaritySubsampleAbove);
        std::sort(chosen.begin(), chosen.end());
    }

    SimilarityStats stats;
    stats.samples = chosen.size();
    std::vector<double> values;
    values.reserve(chosen.size());
    for (auto i : chosen) {
        if (auto v = context_similarity(samples[i], matrix))
            values.push_back(*v);
        else
            ++stats.skipped;
    }
    stats.measured = values.size();
    if (values.empty())
        return stats;
    stats.mean = pairwise_sum(values) / static_cast<double>(values.size());
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        sq[i] = (values[i] - stats.mean) * (values[i] - stats.mean);
    stats.stddev = std::sqrt(pairwise_sum(sq) / static_cast<double>(values.size()));
    return stats;
}

double entropy_bits(std::span<const std::uint64_t> counts)
{
    double total = 0.0;
    for (auto c : counts)
        total += static_cast<double>(c);
    if (total <= 0.0)
        return 0.0;
    std::vector<double> terms;
    terms.reserve(counts.size());
    for (auto c : counts) {
        if (c == 0)
            continue;
        const double p = static_cast<double>(c) / total;
        terms.push_back(-p * std::log2(p));
    }
    std::sort(terms.begin(), terms.end());
    return std::max(0.0, pairwise_sum(terms));
}

double keyword_entropy(std::span<const KeywordAssignment> assignments)
{
    std::map<std::string, std::uint64_t> counts;
    for (const auto& a : assignments) {
        if (a.keyword)
            ++counts[*a.keyword];
    }
    if (counts.empty())
        throw DomainError("keyword_entropy: no keyed documents");
    std::vector<std::uint64_t> values;
    values.reserve(counts.size());
    for (const auto& [k, c] : counts)
        values.push_back(c);
    return entropy_bits(values);
}

DomainHistogram domain_distribution(std::span<const ContextSample> samples, const CorpusStore& corpus)
{
    std::map<std::string, std::uint64_t> mass;
    std::uint64_t total = 0;
    for (const auto& sample : samples) {
        for (const auto& s : sample.slices) {
            const auto& domain = corpus[s.doc].domain;
            mass[domain ? *domain : std::string(kUnknownDomain)] += s.tokens;
            total += s.tokens;
        }
    }
    DomainHistogram out;
    if (total == 0)
        return out;
    for (const auto& [domain, m] : mass)
        out[domain] = static_cast<double>(m) / static_cast<double>(total);
    return out;
}

double histogram_entropy(const DomainHistogram& histogram)
{
    std::vector<double> terms;
    for (const auto& [k, p] : histogram) {
        if (p > 0.0)
            terms.push_back(-p * std::log2(p));
    }
    std::sort(terms.begin(), terms.end());
    return std::max(0.0, pairwise_sum(terms));
}

std::vector<ContextSample> long_document_samples(const CorpusStore& corpus, std::uint64_t length)
{
    if (length == 0)
        throw DomainError("long_document_samples: length must be >= 1");
    std::vector<ContextSample> out;
    for (DocIndex d = 0; d < corpus.size(); ++d) {
        const auto tokens = corpus[d].token_count;
        for (std::uint64_t begin = 0; begin + length <= tokens; begin += length) {
            ContextSample s;
            s.method = Method::standard;
            s.slices.push_back({d, begin, length});
            s.token_count = length;
            s.truncated_tail = begin + length < tokens;
            out.push_back(std::move(s));
        }
    }
    return out;
}

MethodDiagnostics diagnose_method(std::string label, std::span<const ContextSample> samples,
                                  const CorpusStore& corpus, const EmbeddingMatrix<double>& matrix,
                                  std::uint64_t seed)
{
    MethodDiagnostics out;
    out.label = std::move(label);
    out.similarity = similarity_stats(samples, matrix, seed);
    out.domains = domain_distribution(samples, corpus);
    out.samples = samples.size();
    return out;
}

nlohmann::json DiagnosticsReport::to_json() const
{
    nlohmann::json methods_json = nlohmann::json::array();
    for (const auto& m : methods) {
        nlohmann::json domains = nlohmann::json::object();
        for (const auto& [k, v] : m.domains)
            domains[k] = v;
        methods_json.push_back({
            {"method", m.label},
            {"samples", m.samples},
            {"similarity",
             {{"mean", m.similarity.mean},
              {"stddev", m.similarity.stddev},
              {"measured", m.similarity.measured},
              {"skipped", m.similarity.skipped}}},
            {"domain_histogram", std::move(domains)},
            {"domain_entropy_bits", histogram_entropy(m.domains)},
        });
    }
    nlohmann::json out = {
        {"methods", std::move(methods_json)},
        {"keyed_documents", keyed_documents},
        {"unkeyed_documents", unkeyed_documents},
    };
    out["keyword_entropy_bits"] = keyword_entropy_bits ? nlohmann::json(*keyword_entropy_bits) : nlohmann::json();
    return out;
}

std::string DiagnosticsReport::to_table() const
{
    std::ostringstream os;
    os << std::left << std::setw(28) << "method" << std::right << std::setw(10) << "samples" << std::setw(12)
       << "sim_mean" << std::setw(12) << "sim_std" << std::setw(12) << "dom_H" << '\n';
    os << std::fixed;
    for (const auto& m : methods) {
        os << std::left << std::setw(28) << m.label << std::right << std::setw(10) << m.samples << std::setw(12)
           << std::setprecision(4) << m.similarity.mean << std::setw(12) << m.similarity.stddev << std::setw(12)
           << histogram_entropy(m.domains) << '\n';
    }
    if (keyword_entropy_bits)
        os << "keyword entropy (bits): " << std::setprecision(4) << *keyword_entropy_bits << '\n';
    os << "keyed documents: " << keyed_documents << ", unkeyed: " << unkeyed_documents << '\n';
    return os.str();
}

void write_embedding_dump(std::ostream& out, std::span<const ContextSample> samples, const CorpusStore& corpus,
                          const EmbeddingMatrix<double>& matrix)
{
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (const auto& s : samples[i].slices) {
            if (!matrix.retrievable(s.doc))
                continue;
            const auto row = matrix.row(s.doc);
            std::vector<double> v(row.data(), row.data() + row.size());
            out << nlohmann::json{{"sample", i},
                                  {"method", to_string(samples[i].method)},
                                  {"doc_id", corpus[s.doc].id},
                                  {"vector", std::move(v)}}
                       .dump()
                << '\n';
        }
    }
}

} // namespace quest
