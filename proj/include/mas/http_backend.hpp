#pragma once

#include <mutex>

#include "mas/backend.hpp"
#include "mas/util.hpp"

namespace mas {

// OpenAI-compatible /chat/completions client. `endpoint` is the API base,
// e.g. "http://localhost:8000/v1". Transport failures, 429 and 5xx responses
// are retried with jittered exponential backoff.
class OpenAIChatBackend : public ChatBackend {
public:
    OpenAIChatBackend(BackendConfig config, std::uint64_t jitter_seed = 0);

    ChatResponse complete(const ChatRequest& request) override;
    std::string model() const override { return config_.model; }

    void set_backoff_ms(int base_ms) { backoff_ms_ = base_ms; }

private:
    BackendConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::string api_key_;
    int backoff_ms_ = 250;
    std::mutex rng_mu_;
    Rng jitter_;
};

// Echoes the last message back inside an <answer> tag.
class EchoBackend : public ChatBackend {
public:
    ChatResponse complete(const ChatRequest& request) override;
    std::string model() const override { return "echo"; }
};

}  // namespace mas
