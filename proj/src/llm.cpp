#include "ragredteam/llm.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <random>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "ragredteam/errors.hpp"

namespace ragredteam::llm {

using nlohmann::json;

namespace {

void validate(const ChatRequest& request) {
    if (request.user.empty())
        throw ValidationError("chat request needs a non-empty user message");
    if (request.temperature < 0.0 || request.temperature > 2.0)
        throw ValidationError("chat temperature must be in [0, 2]");
}

// base_url may carry a path prefix ("https://host/v1"); httplib wants the
// origin and the path separately.
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
    auto scheme_end = base_url.find("://");
    std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    auto path_start = base_url.find('/', host_start);
    if (path_start == std::string::npos) return {base_url, ""};
    std::string prefix = base_url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {base_url.substr(0, path_start), prefix};
}

int jitter_ms(int base_ms) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_int_distribution<int> dist(0, std::max(base_ms / 2, 1));
    return dist(rng);
}

bool retryable_status(int status) {
    return status == 429 || status >= 500;
}

} // namespace

// Bounds the number of in-flight requests; std::counting_semaphore wants a
// compile-time ceiling, so roll a small one.
class HttpChatClient::Gate {
public:
    explicit Gate(int limit) : available_(std::max(limit, 1)) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [this] { return available_ > 0; });
        --available_;
    }
    void release() {
        {
            std::lock_guard lock(mutex_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

HttpChatClient::HttpChatClient(ChatClientConfig config, std::string api_key)
    : config_(std::move(config)),
      api_key_(std::move(api_key)),
      gate_(std::make_shared<Gate>(config_.parallelism_limit)) {
    if (config_.base_url.empty())
        throw ConfigError("chat client needs a base_url");
}

std::string HttpChatClient::chat(const ChatRequest& request) {
    validate(request);

    json body;
    body["model"] = request.model.empty() ? config_.model : request.model;
    json messages = json::array();
    if (request.system)
        messages.push_back({{"role", "system"}, {"content", *request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    body["messages"] = std::move(messages);
    body["temperature"] = request.temperature;
    if (request.max_tokens)
        body["max_tokens"] = *request.max_tokens;
    else if (config_.max_tokens)
        body["max_tokens"] = *config_.max_tokens;

    auto [origin, prefix] = split_base_url(config_.base_url);
    httplib::Client client(origin);
    client.set_connection_timeout(static_cast<time_t>(config_.timeout_seconds), 0);
    client.set_read_timeout(static_cast<time_t>(config_.timeout_seconds), 0);
    client.set_write_timeout(static_cast<time_t>(config_.timeout_seconds), 0);

    httplib::Headers headers;
    if (!api_key_.empty())
        headers.emplace("Authorization", "Bearer " + api_key_);

    gate_->acquire();
    struct Release {
        Gate* g;
        ~Release() { g->release(); }
    } release{gate_.get()};

    std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            int delay = config_.backoff_base_ms * (1 << (attempt - 1)) +
                        jitter_ms(config_.backoff_base_ms);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        auto res = client.Post(prefix + "/chat/completions", headers, payload, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) {
            json reply = json::parse(res->body, nullptr, false);
            if (reply.is_discarded())
                throw ParseError("chat reply is not valid JSON");
            try {
                return reply.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const json::exception&) {
                throw ParseError("chat reply lacks choices[0].message.content");
            }
        }
        if (!retryable_status(res->status))
            throw TransportError("chat endpoint returned status " + std::to_string(res->status));
        last_error = "status " + std::to_string(res->status);
    }
    throw TransportError("chat request failed after " + std::to_string(config_.max_retries + 1) +
                         " attempts (last: " + last_error + ")");
}

ScriptedChatClient ScriptedChatClient::from_replies(std::vector<std::string> replies) {
    ScriptedChatClient client;
    client.queue_ = std::move(replies);
    return client;
}

ScriptedChatClient ScriptedChatClient::from_map(std::map<std::string, std::string> routes,
                                                std::optional<std::string> fallback) {
    ScriptedChatClient client;
    client.use_map_ = true;
    client.routes_ = std::move(routes);
    client.fallback_ = std::move(fallback);
    return client;
}

ScriptedChatClient ScriptedChatClient::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open script file \"" + path + "\"");
    json script = json::parse(in, nullptr, false);
    if (script.is_discarded() || !script.is_object())
        throw ParseError("script file \"" + path + "\" is not a JSON object");
    if (script.contains("replies")) {
        return from_replies(script["replies"].get<std::vector<std::string>>());
    }
    if (script.contains("map")) {
        std::map<std::string, std::string> routes;
        for (const auto& [key, value] : script["map"].items())
            routes.emplace(key, value.get<std::string>());
        std::optional<std::string> fallback;
        if (script.contains("default")) fallback = script["default"].get<std::string>();
        return from_map(std::move(routes), std::move(fallback));
    }
    throw ParseError("script file \"" + path + "\" needs a \"replies\" or \"map\" key");
}

std::string ScriptedChatClient::chat(const ChatRequest& request) {
    validate(request);
    std::lock_guard lock(*mutex_);
    prompts_.push_back(request.user);
    if (use_map_) {
        for (const auto& [needle, reply] : routes_)
            if (request.user.find(needle) != std::string::npos) return reply;
        if (fallback_) return *fallback_;
        throw ScriptError("no scripted reply matches prompt: \"" +
                          request.user.substr(0, 80) + "\"");
    }
    if (next_ >= queue_.size())
        throw ScriptError("scripted reply queue exhausted at call " +
                          std::to_string(prompts_.size()) + ", prompt: \"" +
                          request.user.substr(0, 80) + "\"");
    return queue_[next_++];
}

std::vector<std::string> ScriptedChatClient::prompts_seen() const {
    std::lock_guard lock(*mutex_);
    return prompts_;
}

std::size_t ScriptedChatClient::call_count() const {
    std::lock_guard lock(*mutex_);
    return prompts_.size();
}

namespace {

bool is_local_endpoint(const std::string& base_url) {
    return base_url.find("localhost") != std::string::npos ||
           base_url.find("127.0.0.1") != std::string::npos;
}

} // namespace

std::unique_ptr<ChatClient> make_chat_client(const ChatClientConfig& config) {
    if (config.mode == "scripted") {
        if (config.script_path.empty())
            throw ConfigError("scripted chat client needs a script file (llm.script)");
        return std::make_unique<ScriptedChatClient>(
            ScriptedChatClient::from_file(config.script_path));
    }
    if (config.mode != "http")
        throw ConfigError("unknown chat client mode \"" + config.mode + "\"");

    std::string key;
    if (const char* env = std::getenv(config.api_key_env.c_str()); env && *env) key = env;
    if (key.empty() && !is_local_endpoint(config.base_url))
        throw ConfigError("environment variable " + config.api_key_env +
                          " is not set but a live endpoint is configured (" + config.base_url + ")");
    return std::make_unique<HttpChatClient>(config, std::move(key));
}

} // namespace ragredteam::llm
