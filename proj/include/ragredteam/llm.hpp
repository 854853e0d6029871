#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ragredteam::llm {

struct ChatRequest {
    std::optional<std::string> system;
    std::string user;
    double temperature = 0.1;
    std::string model;
    std::optional<int> max_tokens;
};

struct ChatClientConfig {
    std::string base_url;
    std::string model;
    double temperature = 0.1;
    double timeout_seconds = 60.0;
    int max_retries = 3;
    int parallelism_limit = 4;
    std::optional<int> max_tokens;
    int backoff_base_ms = 1000;
    std::string api_key_env = "RAGREDTEAM_API_KEY";
    std::string mode = "http";   // "http" | "scripted"
    std::string script_path;     // scripted mode: JSON script file
};

/// One prompt/reply exchange; pipelines collect these so every run can be
/// audited and replayed.
struct TranscriptEntry {
    std::string agent;
    std::string prompt;
    std::string reply;

    bool operator==(const TranscriptEntry&) const = default;
};
using Transcript = std::vector<TranscriptEntry>;

class ChatClient {
public:
    virtual ~ChatClient() = default;

    /// Sends one chat completion request and returns the assistant text.
    /// Throws ValidationError on an empty user message, TransportError on
    /// exhausted retries or a terminal HTTP status.
    virtual std::string chat(const ChatRequest& request) = 0;
};

/// Live client for the de facto chat-completions wire format:
/// POST {base_url}/chat/completions with a messages array, reply at
/// choices[0].message.content. Retries transport failures, 429 and 5xx
/// with exponential backoff (base, factor 2, jitter). At most
/// parallelism_limit requests are in flight at once.
class HttpChatClient : public ChatClient {
public:
    /// api_key may be empty (e.g. local gateways); the CLI layer enforces
    /// the RAGREDTEAM_API_KEY requirement for live endpoints.
    explicit HttpChatClient(ChatClientConfig config, std::string api_key = {});
    std::string chat(const ChatRequest& request) override;

private:
    class Gate;
    ChatClientConfig config_;
    std::string api_key_;
    std::shared_ptr<Gate> gate_;
};

/// Deterministic client for tests and offline runs. Two modes:
/// an ordered reply queue, or a map from prompt substring to reply
/// (first matching key in lexicographic order wins; the optional
/// fallback answers prompts no key matches). Records every prompt it
/// receives, in call order.
class ScriptedChatClient : public ChatClient {
public:
    static ScriptedChatClient from_replies(std::vector<std::string> replies);
    static ScriptedChatClient from_map(std::map<std::string, std::string> routes,
                                       std::optional<std::string> fallback = std::nullopt);
    /// Loads {"replies": [...]} or {"map": {...}, "default": "..."} from a
    /// JSON file.
    static ScriptedChatClient from_file(const std::string& path);

    std::string chat(const ChatRequest& request) override;

    std::vector<std::string> prompts_seen() const;
    std::size_t call_count() const;

private:
    ScriptedChatClient() = default;

    mutable std::unique_ptr<std::mutex> mutex_ = std::make_unique<std::mutex>();
    std::vector<std::string> queue_;
    std::size_t next_ = 0;
    bool use_map_ = false;
    std::map<std::string, std::string> routes_;
    std::optional<std::string> fallback_;
    std::vector<std::string> prompts_;
};

/// Builds the client a config asks for. In http mode a live (non-localhost)
/// base_url with the API key env var unset raises ConfigError naming the
/// variable.
std::unique_ptr<ChatClient> make_chat_client(const ChatClientConfig& config);

} // namespace ragredteam::llm
