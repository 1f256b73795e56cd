#include "mas/backend.hpp"

#include <filesystem>
#include <fstream>

#include "mas/util.hpp"

namespace mas {

std::string ChatRequest::fingerprint() const {
    std::string canon = system;
    canon += '\x1f';
    for (const auto& m : messages) {
        canon += m.role;
        canon += '\x1e';
        canon += m.content;
        canon += '\x1f';
    }
    canon += std::to_string(sample);
    return hex64(fnv1a64(canon));
}

std::uint64_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

std::uint64_t estimate_prompt_tokens(const ChatRequest& request) {
    std::uint64_t n = estimate_tokens(request.system);
    for (const auto& m : request.messages) n += estimate_tokens(m.content);
    return n;
}

CallLimiter::CallLimiter(std::size_t limit) : limit_(limit == 0 ? 1 : limit) {}

void CallLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
}

void CallLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

std::size_t CallLimiter::peak() const {
    std::lock_guard lock(mu_);
    return peak_;
}

ChatResponse LimitedBackend::complete(const ChatRequest& request) {
    limiter_.acquire();
    struct Release {
        CallLimiter& l;
        ~Release() { l.release(); }
    } guard{limiter_};
    return inner_.complete(request);
}

namespace {

ChatResponse response_from_json(const nlohmann::json& j) {
    ChatResponse r;
    r.content = j.at("content").get<std::string>();
    r.prompt_tokens = j.value("prompt_tokens", std::uint64_t{0});
    r.completion_tokens = j.value("completion_tokens", estimate_tokens(r.content));
    return r;
}

}  // namespace

std::shared_ptr<ScriptedBackend> ScriptedBackend::load(const std::string& path, std::string model) {
    std::ifstream in(path);
    if (!in) throw BackendError("cannot open transcript: " + path);
    auto backend = std::make_shared<ScriptedBackend>(std::move(model));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_view(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        auto response = response_from_json(j);
        if (j.contains("fingerprint")) {
            backend->add_fingerprint(j["fingerprint"].get<std::string>(), response);
        } else if (j.contains("match")) {
            backend->add_match(j["match"].get<std::string>(), response);
        } else {
            throw BackendError(path + ":" + std::to_string(lineno) + ": entry needs 'fingerprint' or 'match'");
        }
    }
    return backend;
}

void ScriptedBackend::add_fingerprint(const std::string& fingerprint, ChatResponse response) {
    by_fingerprint_[fingerprint] = std::move(response);
}

void ScriptedBackend::add_match(const std::string& needle, ChatResponse response) {
    by_match_.emplace_back(needle, std::move(response));
}

ChatResponse ScriptedBackend::complete(const ChatRequest& request) {
    auto fill = [&](ChatResponse r) {
        if (r.prompt_tokens == 0) r.prompt_tokens = estimate_prompt_tokens(request);
        return r;
    };
    auto it = by_fingerprint_.find(request.fingerprint());
    if (it != by_fingerprint_.end()) return fill(it->second);
    const std::string& last = request.messages.empty() ? request.system : request.messages.back().content;
    for (const auto& [needle, response] : by_match_) {
        if (last.find(needle) != std::string::npos) return fill(response);
    }
    if (fallback_) return fallback_(request);
    throw BackendError("no scripted response for request " + request.fingerprint());
}

BackendConfig BackendConfig::from_json(const nlohmann::json& j, const std::string& base_dir) {
    BackendConfig c;
    c.kind = j.value("kind", c.kind);
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.retries = j.value("retries", c.retries);
    c.transcript = j.value("transcript", c.transcript);
    if (!c.transcript.empty() && !base_dir.empty() && std::filesystem::path(c.transcript).is_relative()) {
        c.transcript = (std::filesystem::path(base_dir) / c.transcript).string();
    }
    return c;
}

nlohmann::json BackendConfig::to_json() const {
    return {{"kind", kind},           {"endpoint", endpoint}, {"model", model},          {"api_key_env", api_key_env},
            {"timeout_s", timeout_s}, {"retries", retries},   {"transcript", transcript}};
}

}  // namespace mas
