#include "workspace.hpp"

#include "quest/errors.hpp"

#include <openssl/evp.h>

#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <memory>
#include <ostream>

#include <fcntl.h>
#include <unistd.h>

namespace quest::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0)
            EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

WorkspaceLock::WorkspaceLock(const fs::path& root) : path_(root / ".lock")
{
    fs::create_directories(root);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
        throw DataError("workspace " + root.string() + " is locked by another run (" + path_.string() + ")");
}

WorkspaceLock::~WorkspaceLock()
{
    if (fd_ >= 0) {
        ::close(fd_);
        std::error_code ec;
        fs::remove(path_, ec);
    }
}

Workspace::Workspace(fs::path root) : root_(std::move(root))
{
    fs::create_directories(root_);
    std::ifstream in(root_ / "manifest.json");
    if (in) {
        const auto manifest = json::parse(in, nullptr, false);
        if (!manifest.is_discarded() && manifest.contains("stages"))
            stages_ = manifest["stages"];
    }
}

std::string Workspace::relative(const fs::path& p) const
{
    const auto rel = fs::relative(p, root_);
    const auto s = rel.generic_string();
    if (s.empty() || s.starts_with(".."))
        return p.generic_string();
    return s;
}

void Workspace::add_input(StageRecord& record, const fs::path& p) const
{
    record.inputs[relative(p)] = sha256_file(p);
}

void Workspace::add_output(StageRecord& record, const fs::path& p) const
{
    record.outputs[relative(p)] = sha256_file(p);
}

namespace {

json to_json(const StageRecord& r)
{
    return {{"config", r.config}, {"seed", r.seed}, {"inputs", r.inputs}, {"outputs", r.outputs},
            {"counters", r.counters}};
}

} // namespace

bool Workspace::up_to_date(const std::string& stage, const std::string& run, const StageRecord& planned) const
{
    if (!stages_.contains(stage) || !stages_[stage].contains(run))
        return false;
    const auto& rec = stages_[stage][run];
    if (rec.value("config", json()) != planned.config || rec.value("seed", std::uint64_t{0}) != planned.seed ||
        rec.value("inputs", json()) != json(planned.inputs))
        return false;
    const auto outputs = rec.value("outputs", json::object());
    for (const auto& [rel, digest] : outputs.items()) {
        const auto path = root_ / rel;
        if (!fs::exists(path) || sha256_file(path) != digest.get<std::string>())
            return false;
    }
    return true;
}

void Workspace::record(const std::string& stage, const std::string& run, const StageRecord& record)
{
    stages_[stage][run] = to_json(record);
}

void Workspace::save_manifest(const std::string& version) const
{
    json manifest = {
        {"tool", "quest-weaver"},
        {"version", version},
        {"stages", stages_},
    };
    const auto tmp = root_ / "manifest.json.tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << manifest.dump(2) << '\n';
    }
    fs::rename(tmp, root_ / "manifest.json");
}

void Progress::emit(const std::string& stage, const std::string& event, json extra)
{
    if (!out_)
        return;
    json line = {{"stage", stage}, {"event", event}};
    for (auto& [k, v] : extra.items())
        line[k] = v;
    *out_ << line.dump() << '\n';
    out_->flush();
}

} // namespace quest::cli
