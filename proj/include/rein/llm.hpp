#pragma once
// Provider-agnostic chat-with-tools completion interface.
//
// Everything above this layer speaks ChatRequest/ModelResponse; only the
// adapters in providers.hpp know any provider wire format.

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rein/dialogue.hpp"
#include "rein/toolkit.hpp"

namespace rein {

enum class Role { User, Assistant, ToolResult, InjectedReasoning };

std::string_view to_string(Role r);

struct ToolCall {
    std::string id;
    std::string name;
    json arguments = json::object();
    bool operator==(const ToolCall&) const = default;
};

struct Message {
    Role role = Role::User;
    std::string content;
    std::vector<ToolCall> tool_calls;  // Assistant only
    std::string tool_call_id;          // ToolResult only
    std::string tool_name;             // ToolResult only

    static Message user(std::string text) { return {Role::User, std::move(text), {}, {}, {}}; }
    static Message assistant(std::string text) { return {Role::Assistant, std::move(text), {}, {}, {}}; }

    bool operator==(const Message&) const = default;
};

struct ChatRequest {
    std::string system_prompt;
    std::vector<Message> messages;
    std::vector<ToolSpec> tool_specs;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    std::string model_id;
    // Schema-constrained generation, when the caller needs structured output.
    std::optional<json> response_schema;

    // Throws InvalidRequest.
    void validate() const;
    // Canonical provider-neutral form; used for logging and request hashing.
    json to_json() const;
};

struct Usage {
    long long input_tokens = 0;
    long long output_tokens = 0;
    bool operator==(const Usage&) const = default;
};

struct ModelResponse {
    enum class Kind { Text, ToolCalls };
    Kind kind = Kind::Text;
    std::string text;
    std::vector<ToolCall> tool_calls;
    json raw;
    Usage usage;

    static ModelResponse of_text(std::string t) {
        ModelResponse r;
        r.text = std::move(t);
        return r;
    }
    static ModelResponse of_tool_calls(std::vector<ToolCall> calls) {
        ModelResponse r;
        r.kind = Kind::ToolCalls;
        r.tool_calls = std::move(calls);
        return r;
    }

    bool operator==(const ModelResponse&) const = default;
};

json response_to_json(const ModelResponse& r);
ModelResponse response_from_json(const json& j);

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ModelResponse complete(const ChatRequest& req) = 0;
};

// Whitespace-delimited token count; the mock's usage accounting.
long long whitespace_tokens(std::string_view text);

struct ScriptStep {
    // Substring the last request message must contain; unchecked when empty.
    std::optional<std::string> match;
    ModelResponse response;
};

ScriptStep script_step_from_json(const json& j);
std::vector<ScriptStep> script_from_json(const json& steps);

// Deterministic test double. Steps are consumed strictly in order; running
// past the end throws ScriptExhausted, a failed match ScriptMismatch.
class ScriptedClient : public ChatClient {
public:
    explicit ScriptedClient(std::vector<ScriptStep> steps, std::string name = "scripted");

    ModelResponse complete(const ChatRequest& req) override;

    std::size_t consumed() const;
    std::size_t remaining() const;

private:
    std::vector<ScriptStep> steps_;
    std::string name_;
    std::size_t cursor_ = 0;
    mutable std::mutex mu_;
};

// Records every request that passes through; used by invariant checks.
class RecordingClient : public ChatClient {
public:
    explicit RecordingClient(ChatClient& inner) : inner_(inner) {}

    ModelResponse complete(const ChatRequest& req) override;

    std::vector<ChatRequest> requests() const;

private:
    ChatClient& inner_;
    std::vector<ChatRequest> requests_;
    mutable std::mutex mu_;
};

// Global token/call budget shared by all clients of a run.
class Budget {
public:
    Budget(std::optional<long long> max_tokens = std::nullopt, std::optional<long long> max_calls = std::nullopt)
        : max_tokens_(max_tokens), max_calls_(max_calls) {}

    // Reserves one call; throws BudgetExceeded when a limit is already hit.
    void acquire_call();
    void charge(const Usage& u);

    long long tokens_used() const { return tokens_.load(); }
    long long calls_made() const { return calls_.load(); }

private:
    std::optional<long long> max_tokens_;
    std::optional<long long> max_calls_;
    std::atomic<long long> tokens_{0};
    std::atomic<long long> calls_{0};
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds base_delay{500};
    double multiplier = 2.0;
    double jitter = 0.25;  // fraction of the delay, drawn from the seeded RNG
    std::uint64_t seed = 0;
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

// Request validation, budget enforcement and bounded exponential-backoff
// retries on TransportError. Never retries invalid requests or refusals.
class ResilientClient : public ChatClient {
public:
    ResilientClient(std::shared_ptr<ChatClient> inner, RetryPolicy policy, std::shared_ptr<Budget> budget = nullptr);

    ModelResponse complete(const ChatRequest& req) override;

    int attempts_last_call() const { return last_attempts_; }

private:
    std::shared_ptr<ChatClient> inner_;
    RetryPolicy policy_;
    std::shared_ptr<Budget> budget_;
    std::mt19937_64 rng_;
    std::mutex mu_;
    int last_attempts_ = 0;
};

enum class RenderRole { TaskAgent, InceptionModule, UserSimulator };

// TaskAgent sees the full extended context; the other roles only its surface.
std::vector<Message> render_context(const ExtendedContext& ctx, RenderRole for_role);
std::vector<Message> render_surface(const SurfaceContext& surface);

// Plain-text transcript of a surface context ("User: ...\nAgent: ...").
std::string format_dialogue(const SurfaceContext& surface);

}  // namespace rein
