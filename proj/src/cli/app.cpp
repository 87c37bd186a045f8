#include "quest/cli.hpp"

#include "settings.hpp"
#include "stages.hpp"
#include "workspace.hpp"

#include "quest/errors.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <memory>

#ifndef QUEST_WEAVER_VERSION
#define QUEST_WEAVER_VERSION "0.0.0"
#endif

namespace quest::cli {

using nlohmann::json;

namespace {

template <typename T>
void assign(T& field, const json& value)
{
    value.get_to(field);
}

#define QW_SETTING(name) {#name, [](Settings& s, const json& v) { assign(s.name, v); }}

} // namespace

const SettingSetters& setting_setters()
{
    static const SettingSetters setters = {
        {"workspace", [](Settings& s, const json& v) { s.workspace = v.get<std::string>(); }},
        QW_SETTING(seed),
        QW_SETTING(threads),
        QW_SETTING(force),
        QW_SETTING(progress),
        QW_SETTING(input),
        QW_SETTING(tokenizer),
        QW_SETTING(strict),
        QW_SETTING(segment_tokens),
        QW_SETTING(predictor_cmd),
        QW_SETTING(predictor_batch),
        QW_SETTING(max_retries),
        QW_SETTING(selection),
        QW_SETTING(stop_keywords),
        QW_SETTING(stopwords),
        QW_SETTING(max_phrase_words),
        QW_SETTING(split_ratio),
        {"oversample_p",
         [](Settings& s, const json& v) { s.oversample_p = v.is_number() ? v.dump() : v.get<std::string>(); }},
        QW_SETTING(length),
        QW_SETTING(method),
        QW_SETTING(num_samples),
        QW_SETTING(emit_text),
        QW_SETTING(separator),
        QW_SETTING(knn_strategy),
        QW_SETTING(knn_k),
        QW_SETTING(iclm_degree),
        QW_SETTING(replacement),
        QW_SETTING(unkeyed_filler),
        QW_SETTING(embeddings),
        QW_SETTING(embedding_dim),
        QW_SETTING(dump_embeddings),
        QW_SETTING(points),
        QW_SETTING(model_label),
        QW_SETTING(holdout),
        QW_SETTING(grid),
        QW_SETTING(ratios),
    };
    return setters;
}

#undef QW_SETTING

namespace {

std::string key_of(const CLI::Option* opt)
{
    auto names = opt->get_lnames();
    std::string key = names.empty() ? opt->get_name() : names.front();
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
}

void add_quest_options(CLI::App* cmd, Settings& s)
{
    cmd->add_option("--length", s.length, "Context length L in tokens");
    cmd->add_option("--oversample-p", s.oversample_p, "Short-set oversampling p, or 'auto'");
    cmd->add_option("--num-samples", s.num_samples, "Samples to synthesize (0 = method default)");
    cmd->add_option("--replacement", s.replacement, "without | refill")->check(CLI::IsMember({"without", "refill"}));
    cmd->add_option("--separator", s.separator, "Document separator string");
    cmd->add_option("--embeddings", s.embeddings, "Precomputed embeddings (JSONL or .npy)");
    cmd->add_option("--embedding-dim", s.embedding_dim, "Hashed TF-IDF dimension");
}

void apply_config(const std::string& path, Settings& s, const std::set<std::string>& explicit_keys)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object())
        throw ConfigError("config file " + path + " must hold a JSON object");
    const auto& setters = setting_setters();
    for (const auto& [key, value] : doc.items()) {
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("unknown config key '" + key + "'");
        if (explicit_keys.contains(key))
            continue;
        try {
            it->second(s, value);
        } catch (const json::exception& e) {
            throw ConfigError("config key '" + key + "' has the wrong type: " + e.what());
        }
    }
}

} // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err)
{
    Settings s;
    std::string config_path;

    CLI::App app{"Query-centric long-context data synthesis", "quest-weaver"};
    app.fallthrough();
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", QUEST_WEAVER_VERSION);
    app.add_option("--workspace", s.workspace, "Workspace directory (env QUEST_WEAVER_WORKSPACE)");
    app.add_option("--config", config_path, "JSON file of settings; flags win");
    app.add_option("--seed", s.seed, "Base seed");
    app.add_option("--threads", s.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--force", s.force, "Re-run even when outputs are current");
    app.add_option("--progress", s.progress, "stderr | none | <file> for JSON-lines progress");

    auto* ingest = app.add_subcommand("ingest", "Load a JSONL corpus into the workspace");
    ingest->add_option("--input", s.input, "Corpus JSONL")->required();
    ingest->add_option("--tokenizer", s.tokenizer, "Tokenizer id (wordpunct | whitespace)");
    ingest->add_flag("--strict", s.strict, "Abort on malformed lines");

    auto* predict = app.add_subcommand("predict", "Generate one query per document segment");
    predict->add_option("--segment-tokens", s.segment_tokens, "Segment size for the predictor");
    predict->add_option("--predictor-cmd", s.predictor_cmd, "External predictor command (line JSON)");
    predict->add_option("--predictor-batch", s.predictor_batch, "In-flight requests")->check(CLI::PositiveNumber);
    predict->add_option("--max-retries", s.max_retries, "Retries after an error response");

    auto* keywords = app.add_subcommand("keywords", "Extract and select representative keywords");
    keywords->add_option("--selection", s.selection, "random | max_score")
        ->check(CLI::IsMember({"random", "max_score"}));
    keywords->add_option("--stop-keywords", s.stop_keywords, "Extra stop keywords, one per line");
    keywords->add_option("--stopwords", s.stopwords, "Replacement stopword list, one per line");
    keywords->add_option("--max-phrase-words", s.max_phrase_words, "Longest candidate phrase (0 = no limit)");

    auto* index = app.add_subcommand("index", "Build the keyword index and split it");
    index->add_option("--split-ratio", s.split_ratio, "Fraction of keywords in the short set");
    index->add_option("--oversample-p", s.oversample_p, "Short-set oversampling p, or 'auto'");
    index->add_option("--length", s.length, "Context length L in tokens");

    auto* synth = app.add_subcommand("synth", "Synthesize long-context samples");
    synth->add_option("--method", s.method, "quest | standard | knn | iclm")
        ->check(CLI::IsMember({"quest", "standard", "knn", "iclm"}));
    add_quest_options(synth, s);
    synth->add_flag("--emit-text", s.emit_text, "Include sample text");
    synth->add_flag("--unkeyed-filler", s.unkeyed_filler, "Chunk unkeyed documents into filler samples");
    synth->add_option("--knn-strategy", s.knn_strategy, "top_k | mid_ranking | random_sampling | reverse_order")
        ->check(CLI::IsMember({"top_k", "mid_ranking", "random_sampling", "reverse_order"}));
    synth->add_option("--knn-k", s.knn_k, "Neighbors per seed (0 = unlimited)");
    synth->add_option("--iclm-degree", s.iclm_degree, "Neighbor graph degree")->check(CLI::PositiveNumber);

    auto* diagnose = app.add_subcommand("diagnose", "Similarity and domain diagnostics over synthesized samples");
    diagnose->add_option("--embeddings", s.embeddings, "Precomputed embeddings (JSONL or .npy)");
    diagnose->add_option("--embedding-dim", s.embedding_dim, "Hashed TF-IDF dimension");
    diagnose->add_option("--length", s.length, "L for the long-document comparison set");
    diagnose->add_flag("--dump-embeddings", s.dump_embeddings, "Write per-document vectors per sample");

    auto* fit = app.add_subcommand("fit-scaling", "Fit L(D) = alpha * exp(-beta * D) + gamma");
    fit->add_option("--points", s.points, "CSV of D_tokens,loss")->required();
    fit->add_option("--model-label", s.model_label, "Label for the fit");
    fit->add_option("--holdout", s.holdout, "Holdout point D:loss (repeatable)");

    auto* sweep = app.add_subcommand("sweep-split-ratio", "Quest synthesis over a grid of split ratios");
    sweep->add_option("--grid", s.grid, "Comma-separated ratios")->delimiter(',');
    add_quest_options(sweep, s);

    auto* corrupt = app.add_subcommand("corrupt", "Quest synthesis with randomly replaced keywords");
    corrupt->add_option("--ratios", s.ratios, "Comma-separated corruption ratios")->delimiter(',');
    corrupt->add_option("--split-ratio", s.split_ratio, "Fraction of keywords in the short set");
    add_quest_options(corrupt, s);

    std::vector<std::string> argv(args.rbegin(), args.rend());
    try {
        app.parse(argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    CLI::App* chosen = app.get_subcommands().front();
    std::set<std::string> explicit_keys;
    for (const auto* scope : {static_cast<const CLI::App*>(&app), static_cast<const CLI::App*>(chosen)}) {
        for (const auto* opt : scope->get_options()) {
            if (opt->count() > 0)
                explicit_keys.insert(key_of(opt));
        }
    }

    std::unique_ptr<std::ofstream> progress_file;
    try {
        if (!config_path.empty())
            apply_config(config_path, s, explicit_keys);
        if (!explicit_keys.contains("workspace")) {
            if (const char* env = std::getenv("QUEST_WEAVER_WORKSPACE"); env && *env)
                s.workspace = env;
        }

        std::ostream* progress_out = nullptr;
        if (s.progress == "stderr") {
            progress_out = &err;
        } else if (s.progress != "none") {
            progress_file = std::make_unique<std::ofstream>(s.progress, std::ios::app);
            if (!*progress_file)
                throw ConfigError("cannot open progress file " + s.progress);
            progress_out = progress_file.get();
        }

        std::filesystem::create_directories(s.workspace);
        WorkspaceLock lock(s.workspace);
        Workspace workspace(s.workspace);
        Progress progress(progress_out);
        StageContext ctx{s, explicit_keys, workspace, progress};
        run_stage(chosen->get_name(), ctx);
        workspace.save_manifest(QUEST_WEAVER_VERSION);
        return exit_ok;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const MissingStage& e) {
        err << "error: " << e.what() << '\n';
        return exit_missing_stage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_failure;
    }
}

} // namespace quest::cli
