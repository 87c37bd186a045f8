#include "quest/corpus.hpp"

#include "quest/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <istream>
#include <variant>

namespace quest {

using nlohmann::json;

CorpusStore::CorpusStore(std::string tokenizer_id, std::vector<Document> documents)
    : tokenizer_id_(std::move(tokenizer_id)), documents_(std::move(documents))
{
    by_id_.reserve(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        const auto& doc = documents_[i];
        if (!by_id_.emplace(doc.id, static_cast<DocIndex>(i)).second)
            throw DataError("duplicate document id: " + doc.id);
        total_tokens_ += doc.token_count;
    }
}

std::optional<DocIndex> CorpusStore::find(std::string_view id) const
{
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end())
        return std::nullopt;
    return it->second;
}

DocIndex CorpusStore::index_of(std::string_view id) const
{
    if (auto i = find(id))
        return *i;
    throw LookupError("unknown document id: " + std::string(id));
}

namespace {

bool blank(std::string_view line)
{
    for (char c : line) {
        if (!is_space_byte(static_cast<unsigned char>(c)))
            return false;
    }
    return true;
}

// Returns the parsed document, or the reason it was rejected.
std::variant<Document, std::string> parse_record(const std::string& line, const Tokenizer& tokenizer)
{
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded())
        return std::string("malformed JSON");
    if (!obj.is_object())
        return std::string("record is not a JSON object");
    auto id = obj.find("id");
    auto text = obj.find("text");
    if (id == obj.end() || !id->is_string())
        return std::string("missing string field \"id\"");
    if (text == obj.end() || !text->is_string())
        return std::string("missing string field \"text\"");

    Document doc;
    doc.id = id->get<std::string>();
    doc.text = text->get<std::string>();
    if (doc.id.empty())
        return std::string("empty id");
    if (doc.text.empty())
        return std::string("empty text");

    if (auto domain = obj.find("domain"); domain != obj.end() && !domain->is_null()) {
        if (!domain->is_string())
            return std::string("field \"domain\" is not a string");
        doc.domain = domain->get<std::string>();
    }
    if (auto count = obj.find("token_count"); count != obj.end() && !count->is_null()) {
        if (!count->is_number_unsigned() && !(count->is_number_integer() && count->get<std::int64_t>() >= 0))
            return std::string("field \"token_count\" is not a non-negative integer");
        doc.token_count = count->get<std::uint64_t>();
    } else {
        doc.token_count = tokenizer.count(doc.text);
    }
    return doc;
}

} // namespace

IngestResult ingest(std::istream& jsonl, const IngestOptions& options)
{
    const Tokenizer tokenizer(options.tokenizer);
    std::vector<Document> docs;
    std::vector<IngestIssue> skipped;
    std::unordered_map<std::string, std::size_t> seen;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(jsonl, line)) {
        ++line_no;
        if (blank(line))
            continue;
        auto parsed = parse_record(line, tokenizer);
        if (auto* reason = std::get_if<std::string>(&parsed)) {
            if (options.strict)
                throw DataError("line " + std::to_string(line_no) + ": " + *reason);
            skipped.push_back({line_no, *reason});
            continue;
        }
        auto& doc = std::get<Document>(parsed);
        if (!seen.emplace(doc.id, line_no).second)
            throw DataError("duplicate document id: " + doc.id + " (line " + std::to_string(line_no) + ")");
        docs.push_back(std::move(doc));
    }
    return {CorpusStore(tokenizer.id(), std::move(docs)), std::move(skipped)};
}

void write_store(const CorpusStore& store, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "records.jsonl", std::ios::binary);
        if (!out)
            throw DataError("cannot write " + (dir / "records.jsonl").string());
        for (const auto& doc : store.documents()) {
            json rec = {{"id", doc.id}, {"text", doc.text}};
            if (doc.domain)
                rec["domain"] = *doc.domain;
            rec["token_count"] = doc.token_count;
            out << rec.dump() << '\n';
        }
    }
    json manifest = {
        {"format", "quest-weaver/corpus-v1"},
        {"tokenizer", store.tokenizer_id()},
        {"documents", store.size()},
        {"total_tokens", store.total_tokens()},
        {"records", "records.jsonl"},
    };
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << '\n';
}

CorpusStore read_store(const std::filesystem::path& dir)
{
    std::ifstream mf(dir / "manifest.json");
    if (!mf)
        throw DataError("missing corpus manifest in " + dir.string());
    json manifest = json::parse(mf);
    if (manifest.value("format", "") != "quest-weaver/corpus-v1")
        throw DataError("unsupported corpus format in " + dir.string());
    std::ifstream records(dir / manifest.at("records").get<std::string>());
    if (!records)
        throw DataError("missing corpus record file in " + dir.string());
    IngestOptions options;
    options.tokenizer.id = manifest.at("tokenizer").get<std::string>();
    options.strict = true;
    auto result = ingest(records, options);
    if (result.store.size() != manifest.at("documents").get<std::size_t>() ||
        result.store.total_tokens() != manifest.at("total_tokens").get<std::uint64_t>())
        throw DataError("corpus record file disagrees with its manifest in " + dir.string());
    return std::move(result.store);
}

std::vector<Segment> segment(const Document& doc, std::size_t max_tokens, const Tokenizer& tokenizer)
{
    if (max_tokens == 0)
        throw DomainError("segment: max_tokens must be >= 1");
    const auto spans = tokenizer.tokenize(doc.text);
    std::vector<Segment> out;
    if (spans.empty())
        return out;
    const std::size_t count = (spans.size() + max_tokens - 1) / max_tokens;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t first = k * max_tokens;
        const std::size_t last = std::min(first + max_tokens, spans.size());
        const std::size_t begin = k == 0 ? 0 : spans[first].begin;
        const std::size_t end = last == spans.size() ? doc.text.size() : spans[last].begin;
        out.push_back({doc.id, k, doc.text.substr(begin, end - begin), last - first});
    }
    return out;
}

std::size_t token_prefix_end(std::string_view text, std::size_t tokens, const Tokenizer& tokenizer)
{
    if (tokens == 0)
        return 0;
    const auto spans = tokenizer.tokenize(text);
    if (tokens >= spans.size())
        return text.size();
    return spans[tokens - 1].end;
}

} // namespace quest
