#pragma once

#include "quest/synthesis.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace quest::cli {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MissingStage : public std::runtime_error {
public:
    explicit MissingStage(const std::string& stage, const std::string& needed_by)
        : std::runtime_error("missing upstream stage '" + stage + "' (needed by '" + needed_by +
                             "'); run `quest-weaver " + stage + "` first"),
          stage_(stage)
    {
    }
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// Every tunable of every stage. Precedence: explicit flag > config file > default.
struct Settings {
    std::filesystem::path workspace = "workspace";
    std::uint64_t seed = 0;
    unsigned threads = 1;
    bool force = false;
    std::string progress = "stderr";

    std::string input;
    std::string tokenizer = "wordpunct";
    bool strict = false;

    std::size_t segment_tokens = 512;
    std::string predictor_cmd;
    std::size_t predictor_batch = 32;
    std::size_t max_retries = 2;

    std::string selection = "random";
    std::string stop_keywords;
    std::string stopwords;
    std::size_t max_phrase_words = 0;

    double split_ratio = 0.1;
    std::string oversample_p = "auto";
    std::uint64_t length = 32768;

    std::string method = "quest";
    std::uint64_t num_samples = 0;
    bool emit_text = false;
    std::string separator = std::string(kDefaultSeparator);
    std::string knn_strategy = "top_k";
    std::size_t knn_k = 0;
    std::size_t iclm_degree = 8;
    std::string replacement = "without";
    bool unkeyed_filler = false;
    std::string embeddings;
    std::int64_t embedding_dim = 1024;

    bool dump_embeddings = false;

    std::string points;
    std::string model_label;
    std::vector<std::string> holdout;

    std::vector<double> grid = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
    std::vector<double> ratios = {0.0, 0.2, 0.5, 1.0};
};

// Config-file key -> setter. Keys are the long flag names with '_' for '-'.
using SettingSetters = std::map<std::string, std::function<void(Settings&, const nlohmann::json&)>>;
const SettingSetters& setting_setters();

} // namespace quest::cli
