#include "quest/errors.hpp"
#include "quest/querygen.hpp"

#include <json.hpp>

#include <cerrno>
#include <csignal>
#include <cstring>
#include <deque>
#include <map>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

namespace quest {

namespace {

using nlohmann::json;

// Child process with its stdin and stdout connected to pipes.
class Subprocess {
public:
    explicit Subprocess(const std::string& command)
    {
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2];
        int from_child[2];
        if (pipe(to_child) != 0)
            throw ProtocolError(std::string("pipe: ") + std::strerror(errno));
        if (pipe(from_child) != 0) {
            close(to_child[0]);
            close(to_child[1]);
            throw ProtocolError(std::string("pipe: ") + std::strerror(errno));
        }
        pid_ = fork();
        if (pid_ < 0)
            throw ProtocolError(std::string("fork: ") + std::strerror(errno));
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        in_ = to_child[1];
        out_ = from_child[0];
    }

    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    ~Subprocess()
    {
        close_input();
        if (out_ >= 0)
            close(out_);
        if (pid_ > 0) {
            int status = 0;
            if (waitpid(pid_, &status, WNOHANG) == 0) {
                kill(pid_, SIGTERM);
                waitpid(pid_, &status, 0);
            }
        }
    }

    void write_line(const std::string& line)
    {
        std::string data = line + '\n';
        const char* p = data.data();
        std::size_t left = data.size();
        while (left > 0) {
            ssize_t n = ::write(in_, p, left);
            if (n < 0) {
                if (errno == EINTR)
                    continue;
                throw ProtocolError(std::string("predictor closed its input: ") + std::strerror(errno));
            }
            p += n;
            left -= static_cast<std::size_t>(n);
        }
    }

    // False at end of stream.
    bool read_line(std::string& line)
    {
        for (;;) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return true;
            }
            char chunk[4096];
            ssize_t n = ::read(out_, chunk, sizeof chunk);
            if (n < 0 && errno == EINTR)
                continue;
            if (n <= 0) {
                if (buffer_.empty())
                    return false;
                line.swap(buffer_);
                buffer_.clear();
                return true;
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void close_input()
    {
        if (in_ >= 0) {
            close(in_);
            in_ = -1;
        }
    }

private:
    pid_t pid_ = -1;
    int in_ = -1;
    int out_ = -1;
    std::string buffer_;
};

std::string segment_key(const std::string& doc_id, std::size_t segment)
{
    return doc_id + '#' + std::to_string(segment);
}

bool all_space(const std::string& s)
{
    for (char c : s) {
        if (!is_space_byte(static_cast<unsigned char>(c)))
            return false;
    }
    return true;
}

} // namespace

PredictionResult predict_external(std::span<const Segment> segments, const PredictorOptions& options)
{
    if (options.command.empty())
        throw ConfigError("predictor command is empty");
    const std::size_t window = std::max<std::size_t>(options.batch, 1);

    std::map<std::string, std::size_t> slot_of;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (!slot_of.emplace(segment_key(segments[i].doc_id, segments[i].index), i).second)
            throw DataError("duplicate segment key " + segment_key(segments[i].doc_id, segments[i].index));
    }

    PredictionResult result;
    std::vector<std::optional<std::string>> answers(segments.size());
    std::vector<std::size_t> attempts(segments.size(), 0);
    std::vector<bool> resolved(segments.size(), false);

    Subprocess child(options.command);
    std::deque<std::size_t> queue;
    for (std::size_t i = 0; i < segments.size(); ++i)
        queue.push_back(i);

    std::map<std::size_t, bool> in_flight;
    std::string line;
    while (!queue.empty() || !in_flight.empty()) {
        while (!queue.empty() && in_flight.size() < window) {
            const std::size_t i = queue.front();
            queue.pop_front();
            const auto& seg = segments[i];
            json req = {{"doc_id", seg.doc_id}, {"segment", seg.index}, {"text", seg.text}};
            child.write_line(req.dump());
            in_flight.emplace(i, true);
            ++attempts[i];
        }

        // The window is drained completely before the next batch goes out.
        while (!in_flight.empty()) {
            const auto& waiting = segments[in_flight.begin()->first];
            if (!child.read_line(line))
                throw ProtocolError("predictor ended its output before answering " +
                                    segment_key(waiting.doc_id, waiting.index));
            json resp = json::parse(line, nullptr, false);
            if (resp.is_discarded() || !resp.is_object())
                throw ProtocolError("malformed predictor response while awaiting " +
                                    segment_key(waiting.doc_id, waiting.index) + ": " + line);
            auto doc = resp.find("doc_id");
            auto seg = resp.find("segment");
            if (doc == resp.end() || !doc->is_string() || seg == resp.end() || !seg->is_number_unsigned())
                throw ProtocolError("predictor response without a valid key while awaiting " +
                                    segment_key(waiting.doc_id, waiting.index) + ": " + line);
            const auto key = segment_key(doc->get<std::string>(), seg->get<std::size_t>());
            auto slot = slot_of.find(key);
            if (slot == slot_of.end() || !in_flight.contains(slot->second))
                throw ProtocolError("predictor answered unexpected segment " + key);
            const std::size_t i = slot->second;
            in_flight.erase(i);

            if (resp.contains("error")) {
                if (attempts[i] > options.max_retries)
                    throw ProtocolError("predictor retries exhausted for segment " + key);
                ++result.retries;
                queue.push_front(i);
                continue;
            }
            auto query = resp.find("query");
            if (query == resp.end() || !query->is_string())
                throw ProtocolError("predictor response for " + key + " has no string \"query\"");
            answers[i] = query->get<std::string>();
            resolved[i] = true;
        }
    }
    child.close_input();

    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& seg = segments[i];
        if (!answers[i] || all_space(*answers[i])) {
            result.empty.emplace_back(seg.doc_id, seg.index);
            continue;
        }
        result.queries.push_back({seg.doc_id, seg.index, std::move(*answers[i])});
    }
    return result;
}

} // namespace quest
