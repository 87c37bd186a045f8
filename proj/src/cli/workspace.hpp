#pragma once

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace quest::cli {

std::string sha256_file(const std::filesystem::path& path);

// Exclusive ownership of a workspace for one run.
class WorkspaceLock {
public:
    explicit WorkspaceLock(const std::filesystem::path& root);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

// What a stage consumed and produced; stored under stages.<stage>.<run>.
struct StageRecord {
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;  // path -> sha256
    std::map<std::string, std::string> outputs; // workspace-relative path -> sha256
    nlohmann::json counters = nlohmann::json::object();
};

class Workspace {
public:
    explicit Workspace(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path stage_dir(const std::string& stage) const { return root_ / stage; }
    std::string relative(const std::filesystem::path& p) const;

    // Digest of an input; workspace files are keyed by relative path.
    void add_input(StageRecord& record, const std::filesystem::path& p) const;
    void add_output(StageRecord& record, const std::filesystem::path& p) const;

    // The recorded run matches config, seed and inputs and its outputs are intact.
    bool up_to_date(const std::string& stage, const std::string& run, const StageRecord& planned) const;

    void record(const std::string& stage, const std::string& run, const StageRecord& record);
    void save_manifest(const std::string& version) const;

    std::size_t stage_count() const { return stages_.size(); }

private:
    std::filesystem::path root_;
    nlohmann::json stages_ = nlohmann::json::object();
};

// JSON lines on a side channel.
class Progress {
public:
    explicit Progress(std::ostream* out) : out_(out) {}
    void emit(const std::string& stage, const std::string& event, nlohmann::json extra = nlohmann::json::object());

private:
    std::ostream* out_;
};

} // namespace quest::cli
