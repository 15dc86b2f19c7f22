#pragma once
// Wire-format adapters for real chat-completions-with-tools providers.

#include <chrono>
#include <memory>
#include <string>

#include "rein/llm.hpp"

namespace rein {

enum class ProviderKind { OpenAI, Anthropic };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::OpenAI;
    std::string base_url;  // scheme://host[:port]
    std::string api_key;
    std::chrono::seconds timeout{120};
};

// Model ids are "<provider>:<model>", e.g. "openai:gpt-4o" or
// "anthropic:claude-3-7-sonnet-latest". The bare id "mock" selects the
// scripted client.
struct ModelRef {
    std::string provider;
    std::string model;
};
ModelRef parse_model_ref(const std::string& id);

// Reads <PROVIDER>_API_KEY and the optional <PROVIDER>_BASE_URL override.
ProviderConfig provider_from_env(ProviderKind kind);
ProviderKind provider_kind_from_string(const std::string& s);

// Payload builders and parsers. The model field holds ModelRef::model.
json openai_payload(const ChatRequest& req, const std::string& model);
ModelResponse openai_parse(const json& body);
json anthropic_payload(const ChatRequest& req, const std::string& model);
ModelResponse anthropic_parse(const json& body);

// Name of the tool Anthropic is forced to call when a response schema is set.
inline constexpr const char* kStructuredOutputTool = "emit_structured_output";

class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ProviderConfig cfg) : cfg_(std::move(cfg)) {}

    ModelResponse complete(const ChatRequest& req) override;

private:
    ProviderConfig cfg_;
};

}  // namespace rein
