#include "rein/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>
#include <thread>

#include "rein/error.hpp"

namespace rein {

std::string_view to_string(Role r) {
    switch (r) {
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::ToolResult: return "tool_result";
        case Role::InjectedReasoning: return "injected_reasoning";
    }
    return "?";
}

namespace {

json tool_call_to_json(const ToolCall& c) { return json{{"id", c.id}, {"name", c.name}, {"arguments", c.arguments}}; }

json message_to_json(const Message& m) {
    json j{{"role", std::string(to_string(m.role))}, {"content", m.content}};
    if (!m.tool_calls.empty()) {
        j["tool_calls"] = json::array();
        for (const auto& c : m.tool_calls) j["tool_calls"].push_back(tool_call_to_json(c));
    }
    if (!m.tool_call_id.empty()) j["tool_call_id"] = m.tool_call_id;
    if (!m.tool_name.empty()) j["tool_name"] = m.tool_name;
    return j;
}

}  // namespace

void ChatRequest::validate() const {
    if (!(temperature >= 0.0 && temperature <= 1.0)) throw InvalidRequest("temperature must lie in [0, 1]");
    if (max_output_tokens <= 0) throw InvalidRequest("max_output_tokens must be positive");
    if (model_id.empty()) throw InvalidRequest("model_id is required");
    if (messages.empty()) throw InvalidRequest("request has no messages");
    for (const auto& m : messages) {
        if (m.role == Role::ToolResult && m.tool_call_id.empty()) throw InvalidRequest("tool result without call id");
        if (m.role != Role::Assistant && !m.tool_calls.empty()) throw InvalidRequest("only assistant messages call tools");
    }
}

json ChatRequest::to_json() const {
    json j{{"system_prompt", system_prompt},
           {"messages", json::array()},
           {"tools", json::array()},
           {"temperature", temperature},
           {"max_output_tokens", max_output_tokens},
           {"model_id", model_id}};
    for (const auto& m : messages) j["messages"].push_back(message_to_json(m));
    for (const auto& t : tool_specs) j["tools"].push_back(tool_schema_json(t));
    if (response_schema) j["response_schema"] = *response_schema;
    return j;
}

json response_to_json(const ModelResponse& r) {
    json j;
    if (r.kind == ModelResponse::Kind::Text) {
        j["text"] = r.text;
    } else {
        j["tool_calls"] = json::array();
        for (const auto& c : r.tool_calls) j["tool_calls"].push_back(tool_call_to_json(c));
    }
    return j;
}

ModelResponse response_from_json(const json& j) {
    if (j.contains("tool_calls")) {
        std::vector<ToolCall> calls;
        for (const auto& c : j.at("tool_calls"))
            calls.push_back({c.value("id", ""), c.at("name").get<std::string>(), c.value("arguments", json::object())});
        if (calls.empty()) throw InvalidValue("tool_calls response must not be empty");
        return ModelResponse::of_tool_calls(std::move(calls));
    }
    return ModelResponse::of_text(j.at("text").get<std::string>());
}

long long whitespace_tokens(std::string_view text) {
    long long n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

// --- scripted mock ---------------------------------------------------------

ScriptStep script_step_from_json(const json& j) {
    ScriptStep s;
    if (j.contains("match") && !j.at("match").is_null()) s.match = j.at("match").get<std::string>();
    s.response = response_from_json(j);
    return s;
}

std::vector<ScriptStep> script_from_json(const json& steps) {
    std::vector<ScriptStep> out;
    for (const auto& s : steps) out.push_back(script_step_from_json(s));
    return out;
}

ScriptedClient::ScriptedClient(std::vector<ScriptStep> steps, std::string name)
    : steps_(std::move(steps)), name_(std::move(name)) {
    for (std::size_t i = 0; i < steps_.size(); ++i) {
        auto& calls = steps_[i].response.tool_calls;
        for (std::size_t k = 0; k < calls.size(); ++k)
            if (calls[k].id.empty()) calls[k].id = "call_" + std::to_string(i) + "_" + std::to_string(k);
    }
}

ModelResponse ScriptedClient::complete(const ChatRequest& req) {
    std::lock_guard lock(mu_);
    if (cursor_ >= steps_.size())
        throw ScriptExhausted(name_ + ": script exhausted after " + std::to_string(steps_.size()) + " steps");
    const ScriptStep& step = steps_[cursor_];
    if (step.match) {
        const std::string& last = req.messages.empty() ? std::string() : req.messages.back().content;
        if (last.find(*step.match) == std::string::npos)
            throw ScriptMismatch(name_ + ": step " + std::to_string(cursor_) + " expected last message containing '" +
                                 *step.match + "'");
    }
    ++cursor_;
    ModelResponse r = step.response;
    long long in = whitespace_tokens(req.system_prompt);
    for (const auto& m : req.messages) in += whitespace_tokens(m.content);
    long long out = whitespace_tokens(r.text);
    for (const auto& c : r.tool_calls) out += whitespace_tokens(c.arguments.dump());
    r.usage = {in, out};
    return r;
}

std::size_t ScriptedClient::consumed() const {
    std::lock_guard lock(mu_);
    return cursor_;
}

std::size_t ScriptedClient::remaining() const {
    std::lock_guard lock(mu_);
    return steps_.size() - cursor_;
}

ModelResponse RecordingClient::complete(const ChatRequest& req) {
    {
        std::lock_guard lock(mu_);
        requests_.push_back(req);
    }
    return inner_.complete(req);
}

std::vector<ChatRequest> RecordingClient::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

// --- budget and retries ------------------------------------------------------

void Budget::acquire_call() {
    if (max_tokens_ && tokens_.load() >= *max_tokens_) throw BudgetExceeded("token budget exhausted");
    long long n = calls_.fetch_add(1) + 1;
    if (max_calls_ && n > *max_calls_) {
        calls_.fetch_sub(1);
        throw BudgetExceeded("call budget exhausted");
    }
}

void Budget::charge(const Usage& u) { tokens_.fetch_add(u.input_tokens + u.output_tokens); }

ResilientClient::ResilientClient(std::shared_ptr<ChatClient> inner, RetryPolicy policy, std::shared_ptr<Budget> budget)
    : inner_(std::move(inner)), policy_(std::move(policy)), budget_(std::move(budget)), rng_(policy_.seed) {
    if (!policy_.sleep) policy_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (policy_.max_attempts < 1) policy_.max_attempts = 1;
}

ModelResponse ResilientClient::complete(const ChatRequest& req) {
    req.validate();
    int attempt = 0;
    for (;;) {
        ++attempt;
        if (budget_) budget_->acquire_call();
        try {
            ModelResponse r = inner_->complete(req);
            if (budget_) budget_->charge(r.usage);
            std::lock_guard lock(mu_);
            last_attempts_ = attempt;
            return r;
        } catch (const TransportError&) {
            if (attempt >= policy_.max_attempts) {
                std::lock_guard lock(mu_);
                last_attempts_ = attempt;
                throw;
            }
        }
        double delay = static_cast<double>(policy_.base_delay.count()) * std::pow(policy_.multiplier, attempt - 1);
        {
            std::lock_guard lock(mu_);
            std::uniform_real_distribution<double> u(-policy_.jitter, policy_.jitter);
            delay *= 1.0 + u(rng_);
        }
        policy_.sleep(std::chrono::milliseconds(static_cast<long long>(std::max(0.0, delay))));
    }
}

// --- rendering ---------------------------------------------------------------

std::string call_id_for(std::size_t entry_index) { return "call_" + std::to_string(entry_index); }

std::vector<Message> render_surface(const SurfaceContext& surface) {
    std::vector<Message> out;
    for (const auto& u : surface.turns)
        out.push_back(u.speaker() == Speaker::User ? Message::user(u.text()) : Message::assistant(u.text()));
    return out;
}

std::vector<Message> render_context(const ExtendedContext& ctx, RenderRole for_role) {
    if (for_role != RenderRole::TaskAgent) return render_surface(ctx.surface_view());
    std::vector<Message> out;
    const auto& entries = ctx.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const ContextEntry& e = entries[i];
        if (e.is<entry::UserTurn>()) {
            out.push_back(Message::user(e.as<entry::UserTurn>().utterance.text()));
        } else if (e.is<entry::AgentTurn>()) {
            out.push_back(Message::assistant(e.as<entry::AgentTurn>().utterance.text()));
        } else if (e.is<entry::Action>()) {
            const auto& a = e.as<entry::Action>().action;
            if (!a.is_tool()) continue;  // surfaced through the AgentTurn that follows
            Message m;
            m.role = Role::Assistant;
            m.tool_calls.push_back({call_id_for(i), a.invocation().tool_name, a.invocation().arguments});
            out.push_back(std::move(m));
        } else if (e.is<entry::ToolOutput>()) {
            const auto& o = e.as<entry::ToolOutput>();
            Message m;
            m.role = Role::ToolResult;
            m.content = o.payload.dump();
            m.tool_call_id = call_id_for(o.for_action_index);
            m.tool_name = entries[o.for_action_index].as<entry::Action>().action.invocation().tool_name;
            out.push_back(std::move(m));
        } else if (e.is<entry::InceptionBlock>()) {
            Message m;
            m.role = Role::InjectedReasoning;
            m.content = e.as<entry::InceptionBlock>().plan_text;
            m.tool_call_id = "inception_" + std::to_string(i);
            out.push_back(std::move(m));
        }
        // RefineNote entries stay internal to the refinement step.
    }
    return out;
}

std::string format_dialogue(const SurfaceContext& surface) {
    std::ostringstream os;
    for (std::size_t i = 0; i < surface.turns.size(); ++i) {
        if (i) os << '\n';
        os << (surface.turns[i].speaker() == Speaker::User ? "User: " : "Agent: ") << surface.turns[i].text();
    }
    return os.str();
}

}  // namespace rein
