// Writes a topic-clustered demo corpus as JSONL.
#include "quest/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

int main(int argc, char** argv)
{
    quest::ClusteredCorpusParams params;
    std::string output = "-";

    CLI::App app{"Generate a topic-clustered JSONL corpus", "quest-weaver-gen"};
    app.add_option("--clusters", params.clusters, "Number of topic clusters")->check(CLI::PositiveNumber);
    app.add_option("--docs-per-cluster", params.docs_per_cluster, "Documents per cluster")->check(CLI::PositiveNumber);
    app.add_option("--overlap", params.cluster_overlap, "Share of in-cluster content words")->check(CLI::Range(0.0, 1.0));
    app.add_option("--min-sentences", params.min_sentences, "Shortest document in sentences");
    app.add_option("--max-sentences", params.max_sentences, "Longest document in sentences");
    app.add_option("--seed", params.seed, "Generator seed");
    app.add_option("--id-prefix", params.id_prefix, "Document id prefix");
    app.add_option("-o,--output", output, "Output path, '-' for stdout");
    CLI11_PARSE(app, argc, argv);

    if (params.min_sentences == 0 || params.min_sentences > params.max_sentences) {
        std::cerr << "error: need 1 <= --min-sentences <= --max-sentences\n";
        return 64;
    }

    const auto corpus = quest::make_clustered_corpus(params);
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (output != "-") {
        file.open(output, std::ios::binary);
        if (!file) {
            std::cerr << "error: cannot write " << output << '\n';
            return 1;
        }
        out = &file;
    }
    for (const auto& doc : corpus.documents) {
        nlohmann::json line = {{"id", doc.id}, {"text", doc.text}};
        if (doc.domain)
            line["domain"] = *doc.domain;
        *out << line.dump() << '\n';
    }
    return 0;
}
