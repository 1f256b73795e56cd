#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace mas {

struct ChatMessage {
    std::string role;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string system;
    std::vector<ChatMessage> messages;
    double temperature = 0.5;
    int max_tokens = 512;
    // Distinguishes repeated samples of the same prompt (SC samples, debate
    // rounds). Part of the fingerprint; not sent on the wire.
    int sample = 0;
    std::optional<std::uint64_t> seed;

    // Hash of system prompt, messages and sample index (16 hex digits).
    std::string fingerprint() const;
};

struct ChatResponse {
    std::string content;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Implementations must tolerate concurrent complete() calls.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
    virtual std::string model() const = 0;
};

// Rough token count used when a backend does not report usage.
std::uint64_t estimate_tokens(std::string_view text);
std::uint64_t estimate_prompt_tokens(const ChatRequest& request);

// Bounds the number of in-flight backend calls across every user of the limiter.
class CallLimiter {
public:
    explicit CallLimiter(std::size_t limit);

    void acquire();
    void release();
    std::size_t limit() const { return limit_; }
    std::size_t peak() const;

private:
    std::size_t limit_;
    std::size_t in_flight_ = 0;
    std::size_t peak_ = 0;
    mutable std::mutex mu_;
    std::condition_variable cv_;
};

class LimitedBackend : public ChatBackend {
public:
    LimitedBackend(ChatBackend& inner, CallLimiter& limiter) : inner_(inner), limiter_(limiter) {}
    ChatResponse complete(const ChatRequest& request) override;
    std::string model() const override { return inner_.model(); }

private:
    ChatBackend& inner_;
    CallLimiter& limiter_;
};

// Backend driven by a callable; handy for mocks and in-process fakes.
class FunctionBackend : public ChatBackend {
public:
    using Handler = std::function<ChatResponse(const ChatRequest&)>;
    FunctionBackend(std::string model, Handler handler) : model_(std::move(model)), handler_(std::move(handler)) {}
    ChatResponse complete(const ChatRequest& request) override { return handler_(request); }
    std::string model() const override { return model_; }

private:
    std::string model_;
    Handler handler_;
};

// Replays canned responses. Entries are keyed by request fingerprint, or by a
// substring of the last message; fingerprints are checked first, then match
// rules in file order. Transcript files are JSON lines:
//   {"fingerprint": "...", "content": "...", "prompt_tokens": 10, "completion_tokens": 5}
//   {"match": "substring", "content": "..."}
// Token counts default to estimate_tokens() when absent.
class ScriptedBackend : public ChatBackend {
public:
    explicit ScriptedBackend(std::string model = "scripted") : model_(std::move(model)) {}

    static std::shared_ptr<ScriptedBackend> load(const std::string& path, std::string model = "scripted");

    void add_fingerprint(const std::string& fingerprint, ChatResponse response);
    void add_match(const std::string& needle, ChatResponse response);
    // Used when nothing matches; without one an unmatched request is a BackendError.
    void set_fallback(std::function<ChatResponse(const ChatRequest&)> fallback) { fallback_ = std::move(fallback); }

    ChatResponse complete(const ChatRequest& request) override;
    std::string model() const override { return model_; }

private:
    std::string model_;
    std::map<std::string, ChatResponse> by_fingerprint_;
    std::vector<std::pair<std::string, ChatResponse>> by_match_;
    std::function<ChatResponse(const ChatRequest&)> fallback_;
};

// Connection settings for a chat backend. `kind` is one of "openai"
// (OpenAI-compatible HTTP), "scripted" (transcript file) or "echo".
struct BackendConfig {
    std::string kind = "echo";
    std::string endpoint;
    std::string model;
    std::string api_key_env;  // name of the env var holding the key, never the key
    double timeout_s = 60.0;
    int retries = 2;
    std::string transcript;

    static BackendConfig from_json(const nlohmann::json& j, const std::string& base_dir = "");
    nlohmann::json to_json() const;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config, std::uint64_t jitter_seed = 0);

}  // namespace mas
