#include "mas/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace mas {

OpenAIChatBackend::OpenAIChatBackend(BackendConfig config, std::uint64_t jitter_seed)
    : config_(std::move(config)), jitter_(derive_seed(jitter_seed, "backend-jitter")) {
    const std::string& ep = config_.endpoint;
    auto scheme_end = ep.find("://");
    if (scheme_end == std::string::npos) throw BackendError("endpoint needs a scheme: " + ep);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (ep.compare(0, scheme_end, "https") == 0) throw BackendError("this build has no TLS support: " + ep);
#endif
    auto path_start = ep.find('/', scheme_end + 3);
    scheme_host_port_ = ep.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : ep.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }
}

ChatResponse OpenAIChatBackend::complete(const ChatRequest& request) {
    nlohmann::json messages = nlohmann::json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    nlohmann::json body{{"model", config_.model},
                        {"messages", messages},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_tokens}};
    if (request.seed) body["seed"] = *request.seed;
    const std::string payload = body.dump();

    httplib::Client client(scheme_host_port_);
    auto timeout = std::chrono::duration<double>(config_.timeout_s);
    auto secs = static_cast<time_t>(config_.timeout_s);
    auto usecs = static_cast<time_t>((timeout.count() - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    const int attempts = std::max(1, config_.retries + 1);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            std::int64_t jitter;
            {
                std::lock_guard lock(rng_mu_);
                jitter = jitter_.uniform(0, backoff_ms_);
            }
            std::this_thread::sleep_for(std::chrono::milliseconds((backoff_ms_ << (attempt - 1)) + jitter));
        }
        auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body);
        try {
            auto j = nlohmann::json::parse(res->body);
            ChatResponse out;
            out.content = j.at("choices").at(0).at("message").at("content").get<std::string>();
            if (j.contains("usage")) {
                out.prompt_tokens = j["usage"].value("prompt_tokens", std::uint64_t{0});
                out.completion_tokens = j["usage"].value("completion_tokens", std::uint64_t{0});
            } else {
                out.prompt_tokens = estimate_prompt_tokens(request);
                out.completion_tokens = estimate_tokens(out.content);
            }
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed completion response: ") + e.what());
        }
    }
    throw BackendError("request failed after " + std::to_string(attempts) + " attempts: " + last_error);
}

ChatResponse EchoBackend::complete(const ChatRequest& request) {
    const std::string& last = request.messages.empty() ? request.system : request.messages.back().content;
    ChatResponse r;
    r.content = "<thinking>echo</thinking><answer>" + last + "</answer>";
    r.prompt_tokens = estimate_prompt_tokens(request);
    r.completion_tokens = estimate_tokens(r.content);
    return r;
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& config, std::uint64_t jitter_seed) {
    if (config.kind == "openai") return std::make_unique<OpenAIChatBackend>(config, jitter_seed);
    if (config.kind == "echo") return std::make_unique<EchoBackend>();
    if (config.kind == "scripted") {
        auto loaded = ScriptedBackend::load(config.transcript, config.model.empty() ? "scripted" : config.model);
        return std::make_unique<ScriptedBackend>(std::move(*loaded));
    }
    throw BackendError("unknown backend kind: " + config.kind);
}

}  // namespace mas
