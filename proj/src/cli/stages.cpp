#include "stages.hpp"

#include "quest/analysis.hpp"
#include "quest/corpus.hpp"
#include "quest/embeddings.hpp"
#include "quest/errors.hpp"
#include "quest/index.hpp"
#include "quest/keywords.hpp"
#include "quest/querygen.hpp"
#include "quest/scaling.hpp"
#include "quest/synthesis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <thread>

namespace quest::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Work items are written by index, so output order is independent of threads.
template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& fn)
{
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers)
                    fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    for (auto& e : errors) {
        if (e)
            std::rethrow_exception(e);
    }
}

std::ofstream open_out(const fs::path& path)
{
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path.string());
    return in;
}

void write_json(const fs::path& path, const json& value)
{
    auto out = open_out(path);
    out << value.dump(2) << '\n';
}

std::string ratio_label(double r)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "ratio_%.2f", r);
    return buf;
}

std::string format_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require(const Workspace& ws, const std::string& stage, const std::string& file, const std::string& needed_by)
{
    if (!fs::exists(ws.stage_dir(stage) / file))
        throw MissingStage(stage, needed_by);
}

CorpusStore load_corpus(const Workspace& ws, const std::string& needed_by)
{
    require(ws, "ingest", "manifest.json", needed_by);
    return read_store(ws.stage_dir("ingest"));
}

std::vector<KeywordAssignment> load_assignments(const Workspace& ws, const std::string& needed_by)
{
    require(ws, "keywords", "assignments.jsonl", needed_by);
    auto in = open_in(ws.stage_dir("keywords") / "assignments.jsonl");
    return read_assignments(in);
}

void add_corpus_inputs(const Workspace& ws, StageRecord& rec)
{
    ws.add_input(rec, ws.stage_dir("ingest") / "manifest.json");
    ws.add_input(rec, ws.stage_dir("ingest") / "records.jsonl");
}

std::optional<double> parse_oversample(const std::string& value)
{
    if (value == "auto")
        return std::nullopt;
    try {
        std::size_t used = 0;
        const double p = std::stod(value, &used);
        if (used != value.size() || !(p >= 0.0))
            throw UsageError("");
        return p;
    } catch (const std::exception&) {
        throw UsageError("--oversample-p expects 'auto' or a number >= 0, got '" + value + "'");
    }
}

// p chosen automatically needs both split sets populated; otherwise 0.
double resolve_p(const std::optional<double>& fixed, const IndexSplit& split)
{
    if (fixed)
        return *fixed;
    if (split.short_set.empty() || split.long_set.empty() || split.n_short + split.n_long == 0)
        return 0.0;
    return equalizing_p(split);
}

SynthesisConfig synthesis_config(const Settings& s)
{
    SynthesisConfig c;
    c.length = s.length;
    c.seed = s.seed;
    c.separator = s.separator;
    c.num_samples = s.num_samples;
    c.replacement = parse_replacement(s.replacement);
    c.unkeyed_filler = s.unkeyed_filler;
    c.knn_strategy = parse_knn_strategy(s.knn_strategy);
    c.knn_k = s.knn_k;
    c.iclm_degree = s.iclm_degree;
    return c;
}

EmbeddingMatrix<double> load_embeddings(const Settings& s, const CorpusStore& corpus, Progress& progress,
                                        const std::string& stage)
{
    if (!s.embeddings.empty()) {
        auto loaded = load_external_embeddings(s.embeddings, corpus);
        for (const auto& w : loaded.warnings)
            progress.emit(stage, "warning", {{"message", w}});
        return std::move(loaded.matrix);
    }
    return embed_corpus<double>(corpus, s.embedding_dim, s.seed);
}

struct QuestRun {
    IndexSplit split;
    double p = 0.0;
    SamplePlan plan;
    SynthesisReport report;
};

QuestRun run_quest(const InvertedIndex& index, double split_ratio, const std::optional<double>& fixed_p,
                   const CorpusStore& corpus, const SynthesisConfig& config, const SampleSink& sink)
{
    QuestRun run;
    run.split = split_index(index, split_ratio, config.length);
    if (run.split.n_short + run.split.n_long == 0)
        throw DataError("no split set holds enough tokens for one context of " + std::to_string(config.length) +
                        " tokens");
    run.p = resolve_p(fixed_p, run.split);
    const auto total = config.num_samples > 0 ? config.num_samples : run.split.n_short + run.split.n_long;
    run.plan = plan_samples(run.split.n_short, run.split.n_long, run.p, total);
    run.report = synth_quest(index, run.split, corpus, config, run.plan, sink);
    return run;
}

json report_json(const SynthesisReport& r)
{
    return {{"samples", r.samples},           {"short_samples", r.short_samples},
            {"long_samples", r.long_samples}, {"shortfall", r.shortfall},
            {"discarded_docs", r.discarded_docs}, {"unkeyed_excluded", r.unkeyed_excluded},
            {"filler_samples", r.filler_samples}, {"leftover_tokens", r.leftover_tokens},
            {"refills", r.refills},           {"reused_neighbors", r.reused_neighbors}};
}

json plan_json(const QuestRun& run)
{
    return {{"split_ratio", run.split.split_ratio},
            {"short_keywords", run.split.short_set.size()},
            {"long_keywords", run.split.long_set.size()},
            {"n_short", run.split.n_short},
            {"n_long", run.split.n_long},
            {"oversample_p", run.p},
            {"planned_short", run.plan.short_samples},
            {"planned_long", run.plan.long_samples}};
}

json entropy_or_null(const std::vector<KeywordAssignment>& assignments)
{
    const bool keyed = std::any_of(assignments.begin(), assignments.end(), [](const auto& a) { return a.keyword.has_value(); });
    return keyed ? json(keyword_entropy(assignments)) : json(nullptr);
}

json similarity_json(const SimilarityStats& s)
{
    return {{"mean", s.mean}, {"stddev", s.stddev}, {"measured", s.measured}, {"skipped", s.skipped}};
}

// ------------------------------------------------------------------ stages

struct Planned {
    std::string run = "default";
    StageRecord record;
};

using Executor = std::function<void(StageRecord&)>;

struct Stage {
    Planned planned;
    Executor execute;
};

Stage plan_ingest(StageContext& ctx)
{
    const auto& s = ctx.settings;
    if (s.input.empty())
        throw UsageError("ingest needs --input <corpus.jsonl>");
    if (!Tokenizer::is_registered(s.tokenizer))
        throw ConfigError("unknown tokenizer id: " + s.tokenizer);
    if (!fs::exists(s.input))
        throw DataError("input corpus not found: " + s.input);
    Stage st;
    auto& rec = st.planned.record;
    rec.config = {{"input", s.input}, {"tokenizer", s.tokenizer}, {"strict", s.strict}};
    ctx.workspace.add_input(rec, s.input);
    st.execute = [&ctx](StageRecord& rec) {
        const auto& s = ctx.settings;
        auto in = open_in(s.input);
        IngestOptions options;
        options.tokenizer.id = s.tokenizer;
        options.strict = s.strict;
        auto result = ingest(in, options);
        const auto dir = ctx.workspace.stage_dir("ingest");
        write_store(result.store, dir);
        {
            auto out = open_out(dir / "skipped.jsonl");
            for (const auto& issue : result.skipped)
                out << json{{"line", issue.line}, {"reason", issue.reason}}.dump() << '\n';
        }
        ctx.workspace.add_output(rec, dir / "manifest.json");
        ctx.workspace.add_output(rec, dir / "records.jsonl");
        ctx.workspace.add_output(rec, dir / "skipped.jsonl");
        rec.counters = {{"documents", result.store.size()},
                        {"skipped", result.skipped.size()},
                        {"total_tokens", result.store.total_tokens()}};
    };
    return st;
}

Stage plan_predict(StageContext& ctx)
{
    const auto& s = ctx.settings;
    require(ctx.workspace, "ingest", "manifest.json", "predict");
    if (s.predictor_cmd.empty() &&
        (ctx.explicit_keys.contains("predictor_batch") || ctx.explicit_keys.contains("max_retries")))
        throw UsageError("--predictor-batch/--max-retries need --predictor-cmd");
    if (s.segment_tokens == 0)
        throw UsageError("--segment-tokens must be >= 1");
    Stage st;
    auto& rec = st.planned.record;
    rec.config = {{"segment_tokens", s.segment_tokens},
                  {"predictor_cmd", s.predictor_cmd},
                  {"predictor_batch", s.predictor_batch},
                  {"max_retries", s.max_retries},
                  {"predictor", s.predictor_cmd.empty() ? "builtin" : "external"}};
    add_corpus_inputs(ctx.workspace, rec);
    st.execute = [&ctx](StageRecord& rec) {
        const auto& s = ctx.settings;
        const auto corpus = load_corpus(ctx.workspace, "predict");
        const Tokenizer tokenizer(TokenizerConfig{corpus.tokenizer_id()});
        std::vector<Segment> segments;
        for (const auto& doc : corpus.documents()) {
            auto segs = segment(doc, s.segment_tokens, tokenizer);
            std::move(segs.begin(), segs.end(), std::back_inserter(segments));
        }

        std::vector<Query> queries;
        std::size_t empty = 0;
        std::size_t retries = 0;
        if (!s.predictor_cmd.empty()) {
            PredictorOptions options{s.predictor_cmd, s.predictor_batch, s.max_retries};
            auto result = predict_external(segments, options);
            queries = std::move(result.queries);
            empty = result.empty.size();
            retries = result.retries;
        } else {
            const IdfTable idf(corpus);
            std::vector<std::optional<Query>> slots(segments.size());
            parallel_for(segments.size(), s.threads, [&](std::size_t i) { slots[i] = predict_builtin(segments[i], idf); });
            for (auto& q : slots) {
                if (q)
                    queries.push_back(std::move(*q));
                else
                    ++empty;
            }
        }
        const auto path = ctx.workspace.stage_dir("predict") / "queries.jsonl";
        {
            auto out = open_out(path);
            write_queries(out, queries);
        }
        ctx.workspace.add_output(rec, path);
        rec.counters = {{"segments", segments.size()},
                        {"queries", queries.size()},
                        {"empty", empty},
                        {"retries", retries}};
    };
    return st;
}

Stage plan_keywords(StageContext& ctx)
{
    const auto& s = ctx.settings;
    require(ctx.workspace, "ingest", "manifest.json", "keywords");
    require(ctx.workspace, "predict", "queries.jsonl", "keywords");
    parse_selection_strategy(s.selection);
    Stage st;
    auto& rec = st.planned.record;
    rec.seed = s.seed;
    rec.config = {{"selection", s.selection},
                  {"stop_keywords", s.stop_keywords},
                  {"stopwords", s.stopwords.empty() ? std::string(kStopwordListVersion) : s.stopwords},
                  {"max_phrase_words", s.max_phrase_words}};
    add_corpus_inputs(ctx.workspace, rec);
    ctx.workspace.add_input(rec, ctx.workspace.stage_dir("predict") / "queries.jsonl");
    if (!s.stop_keywords.empty())
        ctx.workspace.add_input(rec, s.stop_keywords);
    if (!s.stopwords.empty())
        ctx.workspace.add_input(rec, s.stopwords);
    st.execute = [&ctx](StageRecord& rec) {
        const auto& s = ctx.settings;
        const auto corpus = load_corpus(ctx.workspace, "keywords");
        auto in = open_in(ctx.workspace.stage_dir("predict") / "queries.jsonl");
        auto queries = read_queries(in);

        std::vector<std::vector<std::pair<std::size_t, std::string>>> per_doc(corpus.size());
        for (auto& q : queries)
            per_doc[corpus.index_of(q.doc_id)].emplace_back(q.segment_index, std::move(q.text));

        PhraseSet stop_keywords = default_stop_keywords();
        if (!s.stop_keywords.empty()) {
            for (auto& p : load_phrase_file(s.stop_keywords))
                stop_keywords.insert(p);
        }
        const PhraseSet stopwords = s.stopwords.empty() ? english_stopwords() : load_phrase_file(s.stopwords);

        KeywordOptions options;
        options.rake.max_phrase_words = s.max_phrase_words;
        options.strategy = parse_selection_strategy(s.selection);
        options.seed = s.seed;

        std::vector<KeywordAssignment> assignments(corpus.size());
        std::vector<KeywordStats> stats(corpus.size());
        parallel_for(corpus.size(), s.threads, [&](std::size_t d) {
            auto& items = per_doc[d];
            std::sort(items.begin(), items.end());
            std::vector<std::string> texts;
            for (auto& [seg, text] : items)
                texts.push_back(text);
            assignments[d] = assign_keyword(corpus[static_cast<DocIndex>(d)].id, texts, d, stopwords, stop_keywords,
                                            options, &stats[d]);
        });
        KeywordStats total;
        for (const auto& st : stats) {
            total.extracted += st.extracted;
            total.kept += st.kept;
            total.dropped += st.dropped;
            total.unkeyed += st.unkeyed;
        }
        const auto path = ctx.workspace.stage_dir("keywords") / "assignments.jsonl";
        {
            auto out = open_out(path);
            write_assignments(out, assignments);
        }
        ctx.workspace.add_output(rec, path);
        rec.counters = {{"documents", assignments.size()},
                        {"keyed", assignments.size() - total.unkeyed},
                        {"unkeyed", total.unkeyed},
                        {"candidates_extracted", total.extracted},
                        {"keywords_kept", total.kept},
                        {"keywords_dropped", total.dropped}};
        if (total.unkeyed < assignments.size())
            rec.counters["keyword_entropy_bits"] = keyword_entropy(assignments);
    };
    return st;
}

Stage plan_index(StageContext& ctx)
{
    const auto& s = ctx.settings;
    require(ctx.workspace, "ingest", "manifest.json", "index");
    require(ctx.workspace, "keywords", "assignments.jsonl", "index");
    if (!(s.split_ratio >= 0.0 && s.split_ratio <= 1.0))
        throw UsageError("--split-ratio must lie in [0, 1]");
    if (s.length == 0)
        throw UsageError("--length must be >= 1");
    parse_oversample(s.oversample_p);
    Stage st;
    auto& rec = st.planned.record;
    rec.config = {{"split_ratio", s.split_ratio}, {"oversample_p", s.oversample_p}, {"length", s.length}};
    add_corpus_inputs(ctx.workspace, rec);
    ctx.workspace.add_input(rec, ctx.workspace.stage_dir("keywords") / "assignments.jsonl");
    st.execute = [&ctx](StageRecord& rec) {
        const auto& s = ctx.settings;
        const auto corpus = load_corpus(ctx.workspace, "index");
        const auto assignments = load_assignments(ctx.workspace, "index");
        const auto index = build_index(assignments, corpus);
        const auto split = split_index(index, s.split_ratio, s.length);
        const auto fixed = parse_oversample(s.oversample_p);
        const double p = resolve_p(fixed, split);
        const auto dir = ctx.workspace.stage_dir("index");
        write_index(index, split, p, !fixed.has_value(), corpus, dir);
        ctx.workspace.add_output(rec, dir / "manifest.json");
        ctx.workspace.add_output(rec, dir / "buckets.jsonl");
        rec.counters = {{"keywords", index.keyword_count()},
                        {"unkeyed", index.pool().size()},
                        {"short_keywords", split.short_set.size()},
                        {"long_keywords", split.long_set.size()},
                        {"n_short", split.n_short},
                        {"n_long", split.n_long},
                        {"oversample_p", p}};
    };
    return st;
}

Stage plan_synth(StageContext& ctx)
{
    const auto& s = ctx.settings;
    const auto method = parse_method(s.method);
    const auto& ex = ctx.explicit_keys;
    if (method != Method::knn && (ex.contains("knn_strategy") || ex.contains("knn_k")))
        throw UsageError("--knn-strategy/--knn-k only apply to --method knn");
    if (method != Method::iclm && ex.contains("iclm_degree"))
        throw UsageError("--iclm-degree only applies to --method iclm");
    if (method != Method::quest && (ex.contains("replacement") || ex.contains("unkeyed_filler")))
        throw UsageError("--replacement/--unkeyed-filler only apply to --method quest");
    if (s.length == 0)
        throw UsageError("--length must be >= 1");
    const auto config = synthesis_config(s);

    require(ctx.workspace, "ingest", "manifest.json", "synth");
    if (method == Method::quest)
        require(ctx.workspace, "index", "manifest.json", "synth");

    Stage st;
    st.planned.run = std::string(to_string(method));
    if (method == Method::knn)
        st.planned.run += "-" + std::string(to_string(config.knn_strategy));
    auto& rec = st.planned.record;
    rec.seed = s.seed;
    rec.config = {{"method", s.method},       {"length", s.length},          {"num_samples", s.num_samples},
                  {"separator", s.separator}, {"emit_text", s.emit_text}};
    if (method == Method::quest) {
        rec.config["replacement"] = s.replacement;
        rec.config["unkeyed_filler"] = s.unkeyed_filler;
    }
    if (method == Method::knn) {
        rec.config["knn_strategy"] = s.knn_strategy;
        rec.config["knn_k"] = s.knn_k;
    }
    if (method == Method::iclm)
        rec.config["iclm_degree"] = s.iclm_degree;
    if (method == Method::knn || method == Method::iclm) {
        rec.config["embeddings"] = s.embeddings.empty() ? "hashed_tfidf" : s.embeddings;
        rec.config["embedding_dim"] = s.embedding_dim;
        if (!s.embeddings.empty())
            ctx.workspace.add_input(rec, s.embeddings);
    }
    add_corpus_inputs(ctx.workspace, rec);
    if (method == Method::quest) {
        ctx.workspace.add_input(rec, ctx.workspace.stage_dir("index") / "manifest.json");
        ctx.workspace.add_input(rec, ctx.workspace.stage_dir("index") / "buckets.jsonl");
    }
    const auto run = st.planned.run;
    st.execute = [&ctx, method, config, run](StageRecord& rec) {
        const auto& s = ctx.settings;
        const auto corpus = load_corpus(ctx.workspace, "synth");
        const auto dir = ctx.workspace.stage_dir("synth");
        const auto samples_path = dir / (run + ".jsonl");
        auto out = open_out(samples_path);
        SampleWriter writer(out, corpus, config, s.emit_text);
        json summary;
        switch (method) {
        case Method::quest: {
            const auto stored = read_index(ctx.workspace.stage_dir("index"), corpus);
            const auto fixed = parse_oversample(s.oversample_p);
            const auto chosen = ctx.explicit_keys.contains("oversample_p") ? fixed : stored.oversample_p;
            const auto result = run_quest(stored.index, stored.split_ratio, chosen, corpus, config, writer.sink());
            summary = report_json(result.report);
            summary["plan"] = plan_json(result);
            break;
        }
        case Method::standard:
            summary = report_json(synth_standard(corpus, config, writer.sink()));
            break;
        case Method::knn: {
            const auto emb = load_embeddings(s, corpus, ctx.progress, "synth");
            summary = report_json(synth_knn(corpus, emb, config, writer.sink()));
            break;
        }
        case Method::iclm: {
            const auto emb = load_embeddings(s, corpus, ctx.progress, "synth");
            summary = report_json(synth_iclm(corpus, emb, config, writer.sink()));
            break;
        }
        }
        out.close();
        const auto report_path = dir / (run + ".report.json");
        write_json(report_path, summary);
        ctx.workspace.add_output(rec, samples_path);
        ctx.workspace.add_output(rec, report_path);
        rec.counters = summary;
    };
    return st;
}

std::vector<fs::path> sample_files(const Workspace& ws)
{
    std::vector<fs::path> files;
    const auto dir = ws.stage_dir("synth");
    if (fs::exists(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            const auto& p = entry.path();
            if (p.extension() == ".jsonl")
                files.push_back(p);
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

Stage plan_diagnose(StageContext& ctx)
{
    const auto& s = ctx.settings;
    require(ctx.workspace, "ingest", "manifest.json", "diagnose");
    const auto files = sample_files(ctx.workspace);
    if (files.empty())
        throw MissingStage("synth", "diagnose");
    Stage st;
    auto& rec = st.planned.record;
    rec.seed = s.seed;
    rec.config = {{"embeddings", s.embeddings.empty() ? "hashed_tfidf" : s.embeddings},
                  {"embedding_dim", s.embedding_dim},
                  {"dump_embeddings", s.dump_embeddings},
                  {"length", s.length}};
    add_corpus_inputs(ctx.workspace, rec);
    for (const auto& f : files)
        ctx.workspace.add_input(rec, f);
    const auto assignments_path = ctx.workspace.stage_dir("keywords") / "assignments.jsonl";
    if (fs::exists(assignments_path))
        ctx.workspace.add_input(rec, assignments_path);
    if (!s.embeddings.empty())
        ctx.workspace.add_input(rec, s.embeddings);
    st.execute = [&ctx, files, assignments_path](StageRecord& rec) {
        const auto& s = ctx.settings;
        const auto corpus = load_corpus(ctx.workspace, "diagnose");
        const auto emb = load_embeddings(s, corpus, ctx.progress, "diagnose");
        DiagnosticsReport report;
        std::vector<ContextSample> all;
        for (const auto& f : files) {
            auto in = open_in(f);
            auto samples = read_samples(in, corpus);
            report.methods.push_back(diagnose_method(f.stem().string(), samples, corpus, emb, s.seed));
            std::move(samples.begin(), samples.end(), std::back_inserter(all));
        }
        const auto native = long_document_samples(corpus, s.length);
        if (!native.empty())
            report.methods.push_back(diagnose_method("long_documents", native, corpus, emb, s.seed));
        if (fs::exists(assignments_path)) {
            auto in = open_in(assignments_path);
            const auto assignments = read_assignments(in);
            for (const auto& a : assignments)
                ++(a.keyword ? report.keyed_documents : report.unkeyed_documents);
            if (report.keyed_documents > 0)
                report.keyword_entropy_bits = keyword_entropy(assignments);
        }
        const auto dir = ctx.workspace.stage_dir("diagnose");
        write_json(dir / "report.json", report.to_json());
        {
            auto out = open_out(dir / "report.txt");
            out << report.to_table();
        }
        ctx.workspace.add_output(rec, dir / "report.json");
        ctx.workspace.add_output(rec, dir / "report.txt");
        if (s.dump_embeddings) {
            {
                auto out = open_out(dir / "embeddings_dump.jsonl");
                write_embedding_dump(out, all, corpus, emb);
            }
            ctx.workspace.add_output(rec, dir / "embeddings_dump.jsonl");
        }
        rec.counters = {{"methods", report.methods.size()}, {"samples", all.size()}};
    };
    return st;
}

ScalingPoint parse_holdout(const std::string& text)
{
    const auto sep = text.find_first_of(":,");
    if (sep == std::string::npos)
        throw UsageError("--holdout expects D:loss, got '" + text + "'");
    try {
        return {std::stod(text.substr(0, sep)), std::stod(text.substr(sep + 1))};
    } catch (const std::exception&) {
        throw UsageError("--holdout expects D:loss, got '" + text + "'");
    }
}

Stage plan_fit_scaling(StageContext& ctx)
{
    const auto& s = ctx.settings;
    if (s.points.empty())
        throw UsageError("fit-scaling needs --points <csv>");
    for (const auto& h : s.holdout)
        parse_holdout(h);
    if (!fs::exists(s.points))
        throw DataError("scaling points file not found: " + s.points);
    Stage st;
    auto& rec = st.planned.record;
    rec.config = {{"points", s.points}, {"model_label", s.model_label}, {"holdout", s.holdout}};
    ctx.workspace.add_input(rec, s.points);
    st.execute = [&ctx](StageRecord& rec) {
        const auto& s = ctx.settings;
        const auto points = read_scaling_csv(s.points);
        const auto fit = fit_scaling(points, s.model_label);
        const auto dir = ctx.workspace.stage_dir("fit-scaling");
        {
            auto out = open_out(dir / "fit.csv");
            out << "model_label,alpha,beta,gamma,rmse,converged,identifiable\n";
            out << fit.model_label << ',' << format_double(fit.alpha) << ',' << format_double(fit.beta) << ','
                << format_double(fit.gamma) << ',' << format_double(fit.rmse) << ','
                << (fit.converged ? "true" : "false") << ',' << (fit.identifiable ? "true" : "false") << '\n';
        }
        json holdouts = json::array();
        for (const auto& h : s.holdout) {
            const auto p = parse_holdout(h);
            json row = {{"D_tokens", p.tokens}, {"observed", p.loss}};
            if (fit.converged) {
                row["predicted"] = predict_loss(fit, p.tokens);
                row["relative_error"] = relative_error(fit, p.tokens, p.loss);
            }
            holdouts.push_back(std::move(row));
        }
        write_json(dir / "fit.json", {{"model_label", fit.model_label},
                                      {"alpha", fit.alpha},
                                      {"beta", fit.beta},
                                      {"gamma", fit.gamma},
                                      {"rmse", fit.rmse},
                                      {"converged", fit.converged},
                                      {"identifiable", fit.identifiable},
                                      {"iterations", fit.iterations},
                                      {"points", points.size()},
                                      {"holdout", std::move(holdouts)}});
        ctx.workspace.add_output(rec, dir / "fit.csv");
        ctx.workspace.add_output(rec, dir / "fit.json");
        rec.counters = {{"points", points.size()}, {"converged", fit.converged}};
    };
    return st;
}

void quest_common_config(const Settings& s, StageRecord& rec)
{
    rec.config["length"] = s.length;
    rec.config["oversample_p"] = s.oversample_p;
    rec.config["num_samples"] = s.num_samples;
    rec.config["replacement"] = s.replacement;
    rec.config["separator"] = s.separator;
    rec.config["embeddings"] = s.embeddings.empty() ? "hashed_tfidf" : s.embeddings;
    rec.config["embedding_dim"] = s.embedding_dim;
}

Stage plan_sweep(StageContext& ctx)
{
    const auto& s = ctx.settings;
    require(ctx.workspace, "ingest", "manifest.json", "sweep-split-ratio");
    require(ctx.workspace, "keywords", "assignments.jsonl", "sweep-split-ratio");
    if (s.grid.empty())
        throw UsageError("--grid must not be empty");
    for (double r : s.grid) {
        if (!(r >= 0.0 && r <= 1.0))
            throw UsageError("--grid values must lie in [0, 1]");
    }
    parse_oversample(s.oversample_p);
    Stage st;
    auto& rec = st.planned.record;
    rec.seed = s.seed;
    rec.config = {{"grid", s.grid}};
    quest_common_config(s, rec);
    add_corpus_inputs(ctx.workspace, rec);
    ctx.workspace.add_input(rec, ctx.workspace.stage_dir("keywords") / "assignments.jsonl");
    st.execute = [&ctx](StageRecord& rec) {
        const auto& s = ctx.settings;
        const auto corpus = load_corpus(ctx.workspace, "sweep-split-ratio");
        const auto assignments = load_assignments(ctx.workspace, "sweep-split-ratio");
        const auto index = build_index(assignments, corpus);
        const auto emb = load_embeddings(s, corpus, ctx.progress, "sweep-split-ratio");
        const auto config = synthesis_config(s);
        const auto fixed = parse_oversample(s.oversample_p);
        const auto root = ctx.workspace.stage_dir("sweep-split-ratio");
        json summary = json::array();
        for (double r : s.grid) {
            const auto dir = root / ratio_label(r);
            SampleCollector collected;
            const auto result = run_quest(index, r, fixed, corpus, config, collected.sink());
            {
                auto out = open_out(dir / "samples.jsonl");
                SampleWriter writer(out, corpus, config, false);
                for (const auto& sample : collected.samples)
                    writer.write(sample);
            }
            DiagnosticsReport report;
            report.methods.push_back(diagnose_method("quest", collected.samples, corpus, emb, s.seed));
            auto report_json_value = report.to_json();
            report_json_value["plan"] = plan_json(result);
            report_json_value["synthesis"] = report_json(result.report);
            write_json(dir / "report.json", report_json_value);
            ctx.workspace.add_output(rec, dir / "samples.jsonl");
            ctx.workspace.add_output(rec, dir / "report.json");
            summary.push_back({{"split_ratio", r},
                               {"samples", result.report.samples},
                               {"similarity", similarity_json(report.methods.front().similarity)},
                               {"plan", plan_json(result)}});
            ctx.progress.emit("sweep-split-ratio", "ratio", {{"split_ratio", r}, {"samples", result.report.samples}});
        }
        write_json(root / "summary.json", {{"ratios", summary}});
        ctx.workspace.add_output(rec, root / "summary.json");
        rec.counters = {{"ratios", s.grid.size()}};
    };
    return st;
}

Stage plan_corrupt(StageContext& ctx)
{
    const auto& s = ctx.settings;
    require(ctx.workspace, "ingest", "manifest.json", "corrupt");
    require(ctx.workspace, "keywords", "assignments.jsonl", "corrupt");
    for (double r : s.ratios) {
        if (!(r >= 0.0 && r <= 1.0))
            throw UsageError("--ratios values must lie in [0, 1]");
    }
    parse_oversample(s.oversample_p);
    Stage st;
    auto& rec = st.planned.record;
    rec.seed = s.seed;
    rec.config = {{"ratios", s.ratios}, {"split_ratio", s.split_ratio}};
    quest_common_config(s, rec);
    add_corpus_inputs(ctx.workspace, rec);
    ctx.workspace.add_input(rec, ctx.workspace.stage_dir("keywords") / "assignments.jsonl");
    st.execute = [&ctx](StageRecord& rec) {
        const auto& s = ctx.settings;
        const auto corpus = load_corpus(ctx.workspace, "corrupt");
        const auto assignments = load_assignments(ctx.workspace, "corrupt");
        const auto vocab = keyword_vocabulary(assignments);
        const auto emb = load_embeddings(s, corpus, ctx.progress, "corrupt");
        const auto config = synthesis_config(s);
        const auto fixed = parse_oversample(s.oversample_p);
        const auto root = ctx.workspace.stage_dir("corrupt");

        SampleCollector standard;
        synth_standard(corpus, config, standard.sink());
        const auto standard_sim = similarity_stats(standard.samples, emb, s.seed);

        json rows = json::array();
        for (double r : s.ratios) {
            const auto dir = root / ratio_label(r);
            const auto corrupted = corrupt_keywords(assignments, r, vocab, derive_seed(s.seed, 7));
            {
                auto out = open_out(dir / "assignments.jsonl");
                write_assignments(out, corrupted.assignments);
            }
            const auto index = build_index(corrupted.assignments, corpus);
            SampleCollector collected;
            const auto result = run_quest(index, s.split_ratio, fixed, corpus, config, collected.sink());
            {
                auto out = open_out(dir / "samples.jsonl");
                SampleWriter writer(out, corpus, config, false);
                for (const auto& sample : collected.samples)
                    writer.write(sample);
            }
            const auto sim = similarity_stats(collected.samples, emb, s.seed);
            ctx.workspace.add_output(rec, dir / "assignments.jsonl");
            ctx.workspace.add_output(rec, dir / "samples.jsonl");
            rows.push_back({{"ratio", r},
                            {"replaced", corrupted.replaced_doc_ids.size()},
                            {"samples", result.report.samples},
                            {"similarity", similarity_json(sim)},
                            {"keyword_entropy_bits", entropy_or_null(corrupted.assignments)}});
        }
        write_json(root / "summary.json", {{"ratios", rows}, {"standard_similarity", similarity_json(standard_sim)}});
        ctx.workspace.add_output(rec, root / "summary.json");
        rec.counters = {{"ratios", s.ratios.size()}, {"vocabulary", vocab.size()}};
    };
    return st;
}

} // namespace

void run_stage(const std::string& stage, StageContext& ctx)
{
    Stage st;
    if (stage == "ingest")
        st = plan_ingest(ctx);
    else if (stage == "predict")
        st = plan_predict(ctx);
    else if (stage == "keywords")
        st = plan_keywords(ctx);
    else if (stage == "index")
        st = plan_index(ctx);
    else if (stage == "synth")
        st = plan_synth(ctx);
    else if (stage == "diagnose")
        st = plan_diagnose(ctx);
    else if (stage == "fit-scaling")
        st = plan_fit_scaling(ctx);
    else if (stage == "sweep-split-ratio")
        st = plan_sweep(ctx);
    else if (stage == "corrupt")
        st = plan_corrupt(ctx);
    else
        throw UsageError("unknown stage: " + stage);

    const auto& run = st.planned.run;
    if (!ctx.settings.force && ctx.workspace.up_to_date(stage, run, st.planned.record)) {
        ctx.progress.emit(stage, "skipped", {{"run", run}, {"reason", "up to date"}});
        return;
    }
    ctx.progress.emit(stage, "start", {{"run", run}});
    StageRecord rec = st.planned.record;
    st.execute(rec);
    ctx.workspace.record(stage, run, rec);
    ctx.progress.emit(stage, "done", {{"run", run}, {"counters", rec.counters}});
}

} // namespace quest::cli
