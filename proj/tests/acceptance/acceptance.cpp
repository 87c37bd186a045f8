// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit when a
// gated criterion fails.

#include "support/pipeline.hpp"

#include "quest/cli.hpp"
#include "quest/random.hpp"
#include "quest/scaling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <sys/resource.h>

#ifndef QW_DATA_DIR
#define QW_DATA_DIR "data"
#endif

namespace fs = std::filesystem;
using namespace quest;
using quest::testing::assign_corpus;
using quest::testing::clustered_store;
using quest::testing::collect;
using quest::testing::run_quest;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    std::string name;
    bool gated = true;
    std::function<Outcome()> check;
};

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

const CorpusStore& demo_corpus()
{
    static const CorpusStore store = quest::testing::load_jsonl(std::string(QW_DATA_DIR) + "/demo_corpus.jsonl");
    return store;
}

const CorpusStore& clustered_corpus()
{
    static const CorpusStore store = clustered_store();
    return store;
}

// ---------------------------------------------------------------- plan

// Exact rational evaluation with p = a / 1000.
std::uint64_t reference_short_samples(std::uint64_t n_s, std::uint64_t n_l, std::uint64_t a, std::uint64_t total)
{
    if (n_s == 0)
        return 0;
    using i128 = __int128;
    const i128 num = (static_cast<i128>(n_s) * 1000 + static_cast<i128>(a) * (n_s + n_l)) * total;
    const i128 den = static_cast<i128>(1000) * (n_s + n_l);
    const i128 ceil = (num + den - 1) / den;
    return static_cast<std::uint64_t>(std::min<i128>(ceil, total));
}

Outcome check_plan()
{
    Stopwatch clock;
    std::mt19937_64 gen(20240601);
    const std::size_t tuples = 20000;
    std::size_t failures = 0;
    std::string first;
    for (std::size_t t = 0; t < tuples; ++t) {
        std::uint64_t n_s = gen() % 5000;
        std::uint64_t n_l = gen() % 5000;
        if (t % 7 == 0)
            n_s = 0;
        if (n_s + n_l == 0)
            n_l = 1;
        const std::uint64_t a = gen() % 1001;
        const std::uint64_t total = 1 + gen() % 100000;
        const double p = static_cast<double>(a) / 1000.0;
        const auto plan = plan_samples(n_s, n_l, p, total);
        const auto expected = reference_short_samples(n_s, n_l, a, total);
        if (plan.short_samples != expected || plan.short_samples + plan.long_samples != total) {
            if (failures++ == 0)
                first = fmt(" first=(%llu,%llu,%.3f,%llu) got %llu want %llu", (unsigned long long)n_s,
                            (unsigned long long)n_l, p, (unsigned long long)total,
                            (unsigned long long)plan.short_samples, (unsigned long long)expected);
        }
    }
    const double secs = clock.seconds();
    return {failures == 0 && secs < 1.0,
            fmt("%zu tuples, %zu failures, %.3f s", tuples, failures, secs) + first};
}

// ---------------------------------------------------------------- rake

// Independent brute force: enumerate maximal runs, then tabulate.
std::map<std::string, double> reference_rake(const std::vector<std::string>& tokens, const PhraseSet& stopwords,
                                             const std::set<std::string>& punctuation)
{
    std::vector<std::vector<std::string>> phrases;
    std::size_t i = 0;
    while (i < tokens.size()) {
        if (punctuation.count(tokens[i]) || stopwords.count(tokens[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < tokens.size() && !punctuation.count(tokens[j]) && !stopwords.count(tokens[j]))
            ++j;
        phrases.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                             tokens.begin() + static_cast<std::ptrdiff_t>(j));
        i = j;
    }
    std::map<std::string, double> deg;
    std::map<std::string, double> freq;
    for (const auto& ph : phrases) {
        for (const auto& w : ph) {
            freq[w] += 1;
            for (std::size_t k = 0; k < ph.size(); ++k)
                deg[w] += 1; // co-occurrence with every member, itself included
        }
    }
    std::map<std::string, double> out;
    for (const auto& ph : phrases) {
        std::string key;
        double score = 0;
        for (const auto& w : ph) {
            key += (key.empty() ? "" : " ") + w;
            score += deg[w] / freq[w];
        }
        out[key] = std::max(out[key], score);
    }
    return out;
}

Outcome check_rake()
{
    const auto& stop = english_stopwords();
    auto worked = rake_extract("what is the best way to train long context models", stop);
    std::map<std::string, double> got_example;
    for (const auto& c : worked)
        got_example[c.phrase] = c.score;
    const bool example_ok = got_example.size() == 2 && got_example["best way"] == 4.0 &&
                            got_example["train long context models"] == 16.0;

    const std::vector<std::string> content = {"solar", "panel", "energy", "grid", "storage", "battery", "cost",
                                              "model", "context", "long", "train", "data", "river", "delta",
                                              "quantum", "spin", "lattice", "policy", "court", "ruling"};
    const std::vector<std::string> stops = {"the", "of", "and", "is", "to", "in", "what", "how", "a", "for"};
    const std::vector<std::string> punct = {",", ".", "?", "!", ";", ":"};
    const std::set<std::string> punct_set(punct.begin(), punct.end());
    std::mt19937_64 gen(99);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t words = 1 + gen() % 50;
        std::vector<std::string> tokens;
        std::string text;
        for (std::size_t w = 0; w < words; ++w) {
            const auto roll = gen() % 10;
            const auto& pool = roll < 6 ? content : roll < 9 ? stops : punct;
            tokens.push_back(pool[gen() % pool.size()]);
            std::string surface = tokens.back();
            if (gen() % 5 == 0 && roll < 9)
                surface[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(surface[0])));
            text += (text.empty() ? "" : " ") + surface;
        }
        const auto expected = reference_rake(tokens, stop, punct_set);
        const auto got = rake_extract(text, stop);
        bool same = got.size() == expected.size();
        for (const auto& c : got) {
            const auto it = expected.find(c.phrase);
            if (it == expected.end() || std::abs(it->second - c.score) > 1e-9)
                same = false;
        }
        mismatches += same ? 0 : 1;
    }
    return {example_ok && mismatches == 0,
            fmt("worked example %s, %zu/500 randomized mismatches", example_ok ? "exact" : "WRONG", mismatches)};
}

// ---------------------------------------------------------------- filter

std::size_t code_points(const std::string& s)
{
    std::size_t n = 0;
    for (unsigned char c : s)
        n += (c & 0xC0) != 0x80;
    return n;
}

Outcome check_filter()
{
    const std::set<std::string> table = {
        "best way",  "get rid",          "bad idea",     "good way",      "main differences", "valid way",
        "following sentence", "two sentences", "better way", "mean",     "passage mean",     "following data",
        "good idea", "best ways",        "correct way",  "sentence mean", "next word",        "following passage",
        "part 1",    "current state",    "following equation"};
    const auto assignments = assign_corpus(demo_corpus());
    std::size_t checked = 0;
    std::size_t violations = 0;
    for (const auto& a : assignments) {
        for (const auto& c : a.candidates) {
            ++checked;
            std::string stripped;
            for (char ch : c.phrase) {
                if (!std::ispunct(static_cast<unsigned char>(ch)))
                    stripped += ch;
            }
            if (c.score < 3.0 || code_points(stripped) < 4 || table.count(c.phrase))
                ++violations;
        }
        if (a.keyword && std::none_of(a.candidates.begin(), a.candidates.end(),
                                      [&](const auto& c) { return c.phrase == *a.keyword; }))
            ++violations;
    }
    return {checked > 0 && violations == 0, fmt("%zu surviving keywords checked, %zu violations", checked, violations)};
}

// ---------------------------------------------------------------- determinism

int cli(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    if (code != 0)
        std::cerr << "cli failed (" << code << "): " << err.str();
    return code;
}

bool full_pipeline(const fs::path& ws)
{
    const std::string data = QW_DATA_DIR;
    const std::vector<std::string> common = {"--workspace", ws.string(), "--seed", "7", "--progress", "none"};
    const std::vector<std::vector<std::string>> stages = {
        {"ingest", "--input", data + "/demo_corpus.jsonl"},
        {"predict"},
        {"keywords"},
        {"index", "--length", "4096"},
        {"synth", "--method", "quest", "--length", "4096", "--emit-text"},
        {"synth", "--method", "standard", "--length", "4096"},
        {"synth", "--method", "knn", "--length", "4096"},
        {"synth", "--method", "iclm", "--length", "4096"},
        {"diagnose", "--length", "4096"},
        {"fit-scaling", "--points", data + "/scaling_points.csv", "--holdout", "8:1.5366312777774684"},
        {"sweep-split-ratio", "--length", "4096"},
        {"corrupt", "--length", "4096"},
    };
    for (const auto& stage : stages) {
        std::vector<std::string> args = common;
        args.insert(args.end(), stage.begin(), stage.end());
        if (cli(args) != 0)
            return false;
    }
    return true;
}

std::map<std::string, std::string> snapshot(const fs::path& root)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file())
            continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream bytes;
        bytes << in.rdbuf();
        files[fs::relative(e.path(), root).generic_string()] = bytes.str();
    }
    return files;
}

Outcome check_determinism()
{
    Stopwatch clock;
    const auto base = fs::temp_directory_path() / ("qw_accept_" + std::to_string(::getpid()));
    fs::remove_all(base);
    const bool ok_a = full_pipeline(base / "a");
    const bool ok_b = full_pipeline(base / "b");
    const double secs = clock.seconds();
    if (!ok_a || !ok_b) {
        fs::remove_all(base);
        return {false, "pipeline run failed"};
    }
    const auto a = snapshot(base / "a");
    const auto b = snapshot(base / "b");
    std::size_t differing = 0;
    for (const auto& [path, bytes] : a) {
        const auto it = b.find(path);
        differing += (it == b.end() || it->second != bytes) ? 1 : 0;
    }
    differing += a.size() != b.size();
    std::size_t stages = 0;
    if (a.count("manifest.json"))
        stages = nlohmann::json::parse(a.at("manifest.json")).at("stages").size();
    fs::remove_all(base);
    return {differing == 0 && stages == 9 && secs < 30.0,
            fmt("%zu files compared, %zu differ, manifest lists %zu stages, %.1f s for two runs", a.size(), differing,
                stages, secs)};
}

// ---------------------------------------------------------------- quest invariants

Outcome check_invariants()
{
    ClusteredCorpusParams params;
    params.clusters = 40;
    params.docs_per_cluster = 1250;
    params.seed = 77;
    const auto corpus = clustered_store(params);
    const auto assignments = assign_corpus(corpus);
    const Tokenizer tokenizer;

    std::size_t violations = 0;
    std::size_t samples = 0;
    std::string notes;
    for (const auto replacement : {Replacement::without, Replacement::refill}) {
        SynthesisConfig config;
        config.length = 512;
        config.num_samples = 10000;
        config.seed = 3;
        config.replacement = replacement;
        const auto out = run_quest(corpus, assignments, config);
        std::set<DocIndex> used;
        for (const auto& s : out.samples) {
            ++samples;
            bool bad = s.token_count != config.length ||
                       tokenizer.count(sample_text(s, corpus, config)) != config.length;
            std::set<DocIndex> members;
            for (const auto& sl : s.slices)
                bad |= !members.insert(sl.doc).second;
            bad |= s.split_set == SplitSet::none || s.keyword_trace.empty();
            if (replacement == Replacement::without) {
                for (auto d : members)
                    bad |= !used.insert(d).second;
            }
            violations += bad ? 1 : 0;
        }
        // Every traced keyword belongs to the sample's split set.
        const auto index = build_index(assignments, corpus);
        std::set<std::string> short_keywords;
        for (auto pos : out.split.short_set)
            short_keywords.insert(index.buckets()[pos].keyword);
        for (const auto& s : out.samples) {
            for (const auto& kw : s.keyword_trace) {
                if ((s.split_set == SplitSet::short_set) != (short_keywords.count(kw) > 0)) {
                    ++violations;
                    break;
                }
            }
        }
        notes += fmt(" %s=%zu", std::string(to_string(replacement)).c_str(), out.samples.size());
        if (out.samples.size() < 10000)
            ++violations;
    }
    return {violations == 0, fmt("%zu samples,%s, %zu violations", samples, notes.c_str(), violations)};
}

// ---------------------------------------------------------------- similarity

const EmbeddingMatrix<double>& clustered_embeddings()
{
    static const auto m = embed_corpus<double>(clustered_corpus(), 1024, 0);
    return m;
}

const std::vector<KeywordAssignment>& clustered_assignments()
{
    static const auto a = assign_corpus(clustered_corpus());
    return a;
}

SynthesisConfig clustered_config()
{
    SynthesisConfig config;
    config.length = 2048;
    config.seed = 11;
    return config;
}

double mean_similarity(const std::vector<ContextSample>& samples)
{
    return similarity_stats(samples, clustered_embeddings(), 0).mean;
}

Outcome check_similarity()
{
    Stopwatch clock;
    const auto& corpus = clustered_corpus();
    const auto& emb = clustered_embeddings();
    auto config = clustered_config();
    const double standard = mean_similarity(collect([&](auto& sink) { return synth_standard(corpus, config, sink); }));
    const double quest = mean_similarity(run_quest(corpus, clustered_assignments(), config).samples);
    std::map<KnnStrategy, double> knn;
    for (auto strategy : {KnnStrategy::top_k, KnnStrategy::random_sampling, KnnStrategy::reverse_order}) {
        config.knn_strategy = strategy;
        knn[strategy] = mean_similarity(collect([&](auto& sink) { return synth_knn(corpus, emb, config, sink); }));
    }
    const double top = knn[KnnStrategy::top_k];
    const double secs = clock.seconds();
    const bool ok = quest - standard >= 0.05 && top - quest >= 0.05 && knn[KnnStrategy::random_sampling] < top &&
                    knn[KnnStrategy::reverse_order] < top && secs < 120.0;
    return {ok, fmt("standard %.4f < quest %.4f < knn top_k %.4f; random_sampling %.4f, reverse_order %.4f; %.1f s",
                    standard, quest, top, knn[KnnStrategy::random_sampling], knn[KnnStrategy::reverse_order], secs)};
}

Outcome check_corruption()
{
    const auto& corpus = clustered_corpus();
    const auto config = clustered_config();
    const auto& assignments = clustered_assignments();
    const auto vocab = keyword_vocabulary(assignments);
    const double standard = mean_similarity(collect([&](auto& sink) { return synth_standard(corpus, config, sink); }));
    std::vector<double> sims;
    std::string trail;
    for (double ratio : {0.0, 0.2, 0.5, 1.0}) {
        const auto corrupted = corrupt_keywords(assignments, ratio, vocab, 7);
        sims.push_back(mean_similarity(run_quest(corpus, corrupted.assignments, config).samples));
        trail += fmt(" %.1f:%.4f", ratio, sims.back());
    }
    bool monotone = true;
    for (std::size_t i = 1; i < sims.size(); ++i)
        monotone &= sims[i] <= sims[i - 1];
    const bool converges = std::abs(sims.back() - standard) <= 0.02;
    return {monotone && converges, fmt("quest by ratio%s; standard %.4f", trail.c_str(), standard)};
}

// ---------------------------------------------------------------- entropy

Outcome check_entropy()
{
    const auto random = assign_corpus(demo_corpus(), SelectionStrategy::random, 0);
    const auto max_score = assign_corpus(demo_corpus(), SelectionStrategy::max_score, 0);
    std::size_t multi = 0;
    for (const auto& a : random)
        multi += a.candidates.size() >= 2;
    const double h_random = keyword_entropy(random);
    const double h_max = keyword_entropy(max_score);
    const bool strict = multi * 10 >= random.size();
    const bool ok = strict ? h_random > h_max : h_random >= h_max;
    return {ok, fmt("random %.4f bits vs max_score %.4f bits; %zu/%zu docs with >= 2 candidates (%s)", h_random, h_max,
                    multi, random.size(), strict ? "strict" : "non-strict")};
}

// ---------------------------------------------------------------- scaling

double model(double a, double b, double g, double d) { return a * std::exp(-b * d) + g; }

Outcome check_scaling()
{
    Stopwatch clock;
    const std::vector<double> ds = {0.25, 0.5, 1, 2, 4};
    std::vector<ScalingPoint> clean;
    for (double d : ds)
        clean.push_back({d, model(2.0, 0.5, 1.5, d)});
    const auto fit = fit_scaling(clean, "noiseless");
    const double worst = std::max({std::abs(fit.alpha - 2.0) / 2.0, std::abs(fit.beta - 0.5) / 0.5,
                                   std::abs(fit.gamma - 1.5) / 1.5});

    std::mt19937_64 gen(4242);
    std::normal_distribution<double> noise(0.0, 0.002);
    std::vector<double> errors;
    std::size_t unconverged = 0;
    const double holdout = 8.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<ScalingPoint> noisy;
        for (double d : ds)
            noisy.push_back({d, model(2.0, 0.5, 1.5, d) + noise(gen)});
        const auto f = fit_scaling(noisy);
        if (!f.converged) {
            ++unconverged;
            continue;
        }
        const double observed = model(2.0, 0.5, 1.5, holdout) + noise(gen);
        errors.push_back(std::abs(relative_error(f, holdout, observed)));
    }
    std::sort(errors.begin(), errors.end());
    const double median = errors.empty() ? 1.0 : errors[errors.size() / 2];
    const double secs = clock.seconds();
    return {worst <= 1e-6 && fit.converged && median <= 0.01 && unconverged == 0 && secs < 10.0,
            fmt("noiseless max relative parameter error %.2e; noisy median holdout error %.4f%% over %zu fits; %.2f s",
                worst, 100.0 * median, errors.size(), secs)};
}

// ---------------------------------------------------------------- knn

Outcome check_knn()
{
    const auto& corpus = demo_corpus();
    const auto emb = embed_corpus<double>(corpus, 1024, 0);
    const auto n = static_cast<DocIndex>(corpus.size());
    std::size_t inversions = 0;
    std::size_t queries = 0;
    for (DocIndex q = 0; q < n; ++q) {
        if (!emb.retrievable(q))
            continue;
        ++queries;
        std::vector<std::pair<double, DocIndex>> oracle;
        for (DocIndex j = 0; j < n; ++j) {
            if (j == q || !emb.retrievable(j))
                continue;
            double dot = 0, nq = 0, nj = 0;
            for (Eigen::Index c = 0; c < emb.dim(); ++c) {
                dot += emb.vectors()(q, c) * emb.vectors()(j, c);
                nq += emb.vectors()(q, c) * emb.vectors()(q, c);
                nj += emb.vectors()(j, c) * emb.vectors()(j, c);
            }
            oracle.push_back({dot / std::sqrt(nq * nj), j});
        }
        std::sort(oracle.begin(), oracle.end(),
                  [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
        for (std::size_t k : {1u, 10u, 100u}) {
            const auto got = knn_query(emb, q, k);
            if (got.size() != std::min(k, oracle.size())) {
                ++inversions;
                continue;
            }
            for (std::size_t r = 0; r < got.size(); ++r) {
                // Rounding-level differences may reorder exact ties only.
                if (got[r].doc != oracle[r].second && std::abs(got[r].cosine - oracle[r].first) > 1e-12)
                    ++inversions;
            }
        }
    }
    return {inversions == 0 && queries == corpus.size(),
            fmt("%zu queries x k in {1,10,100} against the brute-force ranking, %zu inversions", queries, inversions)};
}

// ---------------------------------------------------------------- throughput

Outcome check_throughput()
{
    const std::size_t docs = 1'000'000;
    const std::size_t keywords = 20'000;
    std::mt19937_64 gen(5);
    std::vector<Document> documents;
    documents.reserve(docs);
    std::vector<KeywordAssignment> assignments;
    assignments.reserve(docs);
    std::uint64_t tokens = 0;
    for (std::size_t i = 0; i < docs; ++i) {
        const std::uint64_t t = 20 + gen() % 181;
        tokens += t;
        documents.push_back({"d" + std::to_string(i), "x", std::nullopt, t});
        // Zipf-like skew over keywords.
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
        const auto k = static_cast<std::size_t>(std::pow(static_cast<double>(keywords), u)) - 1;
        KeywordAssignment a;
        a.doc_id = documents.back().id;
        if (i % 50 != 0)
            a.keyword = "kw" + std::to_string(k);
        assignments.push_back(std::move(a));
    }
    const CorpusStore corpus("wordpunct", std::move(documents));
    Stopwatch clock;
    SynthesisConfig config;
    config.length = 32768;
    const auto out = run_quest(corpus, assignments, config);
    const double secs = clock.seconds();
    rusage usage{};
    getrusage(RUSAGE_SELF, &usage);
    const double gib = static_cast<double>(usage.ru_maxrss) / (1024.0 * 1024.0);
    return {secs < 300.0 && gib < 8.0,
            fmt("%zu docs, %.2e tokens: index + quest synthesis of %llu samples in %.2f s, peak RSS %.2f GiB", docs,
                static_cast<double>(tokens), static_cast<unsigned long long>(out.report.samples), secs, gib)};
}

} // namespace

int main()
{
    const std::vector<Criterion> criteria = {
        {"plan-samples-exactness", true, check_plan},
        {"rake-oracle-equivalence", true, check_rake},
        {"filter-soundness", true, check_filter},
        {"pipeline-determinism", true, check_determinism},
        {"quest-structural-invariants", true, check_invariants},
        {"similarity-ordering", true, check_similarity},
        {"corruption-convergence", true, check_corruption},
        {"entropy-ordering", true, check_entropy},
        {"scaling-fit", true, check_scaling},
        {"knn-exactness", true, check_knn},
        {"throughput (reported, not gated)", false, check_throughput},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
        if (!o.pass && c.gated)
            ++failed;
    }
    return failed == 0 ? 0 : 1;
}
