#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "rein/providers.hpp"

#include <httplib.h>

#include <cstdlib>

#include "rein/error.hpp"

namespace rein {

ModelRef parse_model_ref(const std::string& id) {
    if (id == "mock") return {"mock", "mock"};
    auto colon = id.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == id.size())
        throw ConfigError("model id '" + id + "' must look like <provider>:<model> or be 'mock'");
    return {id.substr(0, colon), id.substr(colon + 1)};
}

ProviderKind provider_kind_from_string(const std::string& s) {
    if (s == "openai") return ProviderKind::OpenAI;
    if (s == "anthropic") return ProviderKind::Anthropic;
    throw ConfigError("unknown provider '" + s + "'");
}

namespace {

std::string env_or(const char* name, std::string fallback) {
    const char* v = std::getenv(name);
    return (v && *v) ? std::string(v) : fallback;
}

json parse_arguments(const std::string& s) {
    if (s.empty()) return json::object();
    try {
        return json::parse(s);
    } catch (const json::parse_error&) {
        // Malformed arguments still reach the tool layer and fail validation there.
        return json{{"_unparsed", s}};
    }
}

}  // namespace

ProviderConfig provider_from_env(ProviderKind kind) {
    ProviderConfig c;
    c.kind = kind;
    if (kind == ProviderKind::OpenAI) {
        c.base_url = env_or("OPENAI_BASE_URL", "https://api.openai.com");
        c.api_key = env_or("OPENAI_API_KEY", "");
    } else {
        c.base_url = env_or("ANTHROPIC_BASE_URL", "https://api.anthropic.com");
        c.api_key = env_or("ANTHROPIC_API_KEY", "");
    }
    return c;
}

// --- OpenAI chat/completions --------------------------------------------------

json openai_payload(const ChatRequest& req, const std::string& model) {
    json msgs = json::array();
    if (!req.system_prompt.empty()) msgs.push_back({{"role", "system"}, {"content", req.system_prompt}});
    for (const auto& m : req.messages) {
        switch (m.role) {
            case Role::User:
                msgs.push_back({{"role", "user"}, {"content", m.content}});
                break;
            case Role::Assistant: {
                json a{{"role", "assistant"}};
                a["content"] = m.content.empty() ? json(nullptr) : json(m.content);
                if (!m.tool_calls.empty()) {
                    a["tool_calls"] = json::array();
                    for (const auto& c : m.tool_calls)
                        a["tool_calls"].push_back({{"id", c.id},
                                                   {"type", "function"},
                                                   {"function", {{"name", c.name}, {"arguments", c.arguments.dump()}}}});
                }
                msgs.push_back(std::move(a));
                break;
            }
            case Role::ToolResult:
                msgs.push_back({{"role", "tool"}, {"tool_call_id", m.tool_call_id}, {"content", m.content}});
                break;
            case Role::InjectedReasoning:
                // A think call the agent never sampled, answered by the plan text.
                msgs.push_back({{"role", "assistant"},
                                {"content", nullptr},
                                {"tool_calls",
                                 json::array({{{"id", m.tool_call_id},
                                               {"type", "function"},
                                               {"function", {{"name", kThinkTool}, {"arguments", "{}"}}}}})}});
                msgs.push_back({{"role", "tool"}, {"tool_call_id", m.tool_call_id}, {"content", m.content}});
                break;
        }
    }
    json body{{"model", model},
              {"messages", std::move(msgs)},
              {"temperature", req.temperature},
              {"max_tokens", req.max_output_tokens}};
    if (!req.tool_specs.empty()) {
        body["tools"] = json::array();
        for (const auto& t : req.tool_specs) body["tools"].push_back(tool_schema_json(t));
    }
    if (req.response_schema)
        body["response_format"] = {{"type", "json_schema"},
                                   {"json_schema", {{"name", "structured_output"}, {"schema", *req.response_schema}}}};
    return body;
}

ModelResponse openai_parse(const json& body) {
    if (!body.contains("choices") || body["choices"].empty())
        throw TransportError("provider response has no choices");
    const json& choice = body["choices"][0];
    const json& msg = choice.at("message");
    if (choice.value("finish_reason", "") == "content_filter" ||
        (msg.contains("refusal") && msg["refusal"].is_string()))
        throw ProviderRefusal("provider refused the request");
    ModelResponse r;
    if (msg.contains("tool_calls") && msg["tool_calls"].is_array() && !msg["tool_calls"].empty()) {
        std::vector<ToolCall> calls;
        for (const auto& c : msg["tool_calls"]) {
            const json& f = c.at("function");
            calls.push_back({c.value("id", ""), f.at("name").get<std::string>(),
                             parse_arguments(f.value("arguments", ""))});
        }
        r = ModelResponse::of_tool_calls(std::move(calls));
    } else {
        r = ModelResponse::of_text(msg.value("content", json("")).is_string() ? msg["content"].get<std::string>() : "");
    }
    if (body.contains("usage"))
        r.usage = {body["usage"].value("prompt_tokens", 0LL), body["usage"].value("completion_tokens", 0LL)};
    r.raw = body;
    return r;
}

// --- Anthropic messages --------------------------------------------------------

namespace {

void push_blocks(json& msgs, const std::string& role, json blocks) {
    if (!msgs.empty() && msgs.back()["role"] == role) {
        for (auto& b : blocks) msgs.back()["content"].push_back(std::move(b));
    } else {
        msgs.push_back({{"role", role}, {"content", std::move(blocks)}});
    }
}

}  // namespace

json anthropic_payload(const ChatRequest& req, const std::string& model) {
    json msgs = json::array();
    for (const auto& m : req.messages) {
        switch (m.role) {
            case Role::User:
                push_blocks(msgs, "user", json::array({{{"type", "text"}, {"text", m.content}}}));
                break;
            case Role::Assistant: {
                json blocks = json::array();
                if (!m.content.empty()) blocks.push_back({{"type", "text"}, {"text", m.content}});
                for (const auto& c : m.tool_calls)
                    blocks.push_back({{"type", "tool_use"}, {"id", c.id}, {"name", c.name}, {"input", c.arguments}});
                push_blocks(msgs, "assistant", std::move(blocks));
                break;
            }
            case Role::ToolResult:
                push_blocks(msgs, "user",
                            json::array({{{"type", "tool_result"}, {"tool_use_id", m.tool_call_id}, {"content", m.content}}}));
                break;
            case Role::InjectedReasoning:
                push_blocks(msgs, "assistant",
                            json::array({{{"type", "tool_use"},
                                          {"id", m.tool_call_id},
                                          {"name", kThinkTool},
                                          {"input", json::object()}}}));
                push_blocks(msgs, "user",
                            json::array({{{"type", "tool_result"}, {"tool_use_id", m.tool_call_id}, {"content", m.content}}}));
                break;
        }
    }
    json body{{"model", model},
              {"messages", std::move(msgs)},
              {"temperature", req.temperature},
              {"max_tokens", req.max_output_tokens}};
    if (!req.system_prompt.empty()) body["system"] = req.system_prompt;
    json tools = json::array();
    for (const auto& t : req.tool_specs)
        tools.push_back({{"name", t.name}, {"description", t.description}, {"input_schema", t.parameters}});
    if (req.response_schema) {
        tools.push_back({{"name", kStructuredOutputTool},
                         {"description", "Return the answer in the required structure."},
                         {"input_schema", *req.response_schema}});
        body["tool_choice"] = {{"type", "tool"}, {"name", kStructuredOutputTool}};
    }
    if (!tools.empty()) body["tools"] = std::move(tools);
    return body;
}

ModelResponse anthropic_parse(const json& body) {
    if (body.value("stop_reason", "") == "refusal") throw ProviderRefusal("provider refused the request");
    if (!body.contains("content")) throw TransportError("provider response has no content");
    std::string text;
    std::vector<ToolCall> calls;
    for (const auto& b : body["content"]) {
        std::string type = b.value("type", "");
        if (type == "text") {
            text += b.value("text", "");
        } else if (type == "tool_use") {
            std::string name = b.at("name").get<std::string>();
            if (name == kStructuredOutputTool) {
                text = b.value("input", json::object()).dump();
                calls.clear();
                break;
            }
            calls.push_back({b.value("id", ""), name, b.value("input", json::object())});
        }
    }
    ModelResponse r = calls.empty() ? ModelResponse::of_text(text) : ModelResponse::of_tool_calls(std::move(calls));
    if (body.contains("usage"))
        r.usage = {body["usage"].value("input_tokens", 0LL), body["usage"].value("output_tokens", 0LL)};
    r.raw = body;
    return r;
}

// --- transport -----------------------------------------------------------------

ModelResponse HttpChatClient::complete(const ChatRequest& req) {
    req.validate();
    ModelRef ref = parse_model_ref(req.model_id);
    httplib::Client cli(cfg_.base_url);
    cli.set_connection_timeout(std::chrono::seconds(30));
    cli.set_read_timeout(cfg_.timeout);
    cli.set_write_timeout(cfg_.timeout);

    httplib::Headers headers;
    std::string path;
    json payload;
    if (cfg_.kind == ProviderKind::OpenAI) {
        headers.emplace("Authorization", "Bearer " + cfg_.api_key);
        path = "/v1/chat/completions";
        payload = openai_payload(req, ref.model);
    } else {
        headers.emplace("x-api-key", cfg_.api_key);
        headers.emplace("anthropic-version", "2023-06-01");
        path = "/v1/messages";
        payload = anthropic_payload(req, ref.model);
    }

    auto res = cli.Post(path, headers, payload.dump(), "application/json");
    if (!res) throw TransportError("connection failed: " + httplib::to_string(res.error()));
    int st = res->status;
    if (st == 429 || st == 408 || st >= 500) throw TransportError("provider returned HTTP " + std::to_string(st));
    if (st == 400 || st == 404 || st == 413 || st == 422)
        throw InvalidRequest("provider rejected request (HTTP " + std::to_string(st) + "): " + res->body.substr(0, 500));
    if (st != 200) throw GatewayError("provider returned HTTP " + std::to_string(st) + ": " + res->body.substr(0, 500));

    json body;
    try {
        body = json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw TransportError(std::string("unparseable provider response: ") + e.what());
    }
    return cfg_.kind == ProviderKind::OpenAI ? openai_parse(body) : anthropic_parse(body);
}

}  // namespace rein
