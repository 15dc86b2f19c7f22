#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <thread>

#include "rein/error.hpp"
#include "rein/providers.hpp"

using namespace rein;

namespace {

ChatRequest agent_like_request() {
    ChatRequest r;
    r.system_prompt = "SYSTEM";
    r.model_id = "openai:gpt-test";
    r.messages.push_back(Message::user("u1"));
    Message call;
    call.role = Role::Assistant;
    call.tool_calls.push_back({"c1", "get_user_details", {{"user_id", "x"}}});
    r.messages.push_back(call);
    Message res;
    res.role = Role::ToolResult;
    res.tool_call_id = "c1";
    res.tool_name = "get_user_details";
    res.content = "{\"name\":\"X\"}";
    r.messages.push_back(res);
    Message inj;
    inj.role = Role::InjectedReasoning;
    inj.tool_call_id = "inception_3";
    inj.content = "PLAN";
    r.messages.push_back(inj);
    r.tool_specs.push_back(transfer_tool_spec());
    return r;
}

// Minimal local stand-in for a chat-completions endpoint.
class FakeProvider {
public:
    explicit FakeProvider(std::function<void(const httplib::Request&, httplib::Response&)> h) {
        svr_.Post(".*", [h](const httplib::Request& req, httplib::Response& res) { h(req, res); });
        port_ = svr_.bind_to_any_port("127.0.0.1");
        th_ = std::thread([this] { svr_.listen_after_bind(); });
        svr_.wait_until_ready();
    }
    ~FakeProvider() {
        svr_.stop();
        th_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server svr_;
    int port_ = 0;
    std::thread th_;
};

}  // namespace

TEST_CASE("model references") {
    auto r = parse_model_ref("openai:gpt-4o");
    CHECK(r.provider == "openai");
    CHECK(r.model == "gpt-4o");
    CHECK(parse_model_ref("anthropic:claude-x:latest").model == "claude-x:latest");
    CHECK(parse_model_ref("mock").provider == "mock");
    CHECK_THROWS_AS(parse_model_ref("gpt-4o"), ConfigError);
    CHECK_THROWS_AS(parse_model_ref(":x"), ConfigError);
    CHECK_THROWS_AS(provider_kind_from_string("acme"), ConfigError);
}

TEST_CASE("openai payload shape") {
    json p = openai_payload(agent_like_request(), "gpt-test");
    CHECK(p["model"] == "gpt-test");
    const auto& m = p["messages"];
    REQUIRE(m.size() == 6);
    CHECK(m[0]["role"] == "system");
    CHECK(m[0]["content"] == "SYSTEM");
    CHECK(m[2]["tool_calls"][0]["function"]["arguments"] == "{\"user_id\":\"x\"}");
    CHECK(m[3]["role"] == "tool");
    // the injected block is a think call answered by the plan
    CHECK(m[4]["role"] == "assistant");
    CHECK(m[4]["tool_calls"][0]["function"]["name"] == "think");
    CHECK(m[5]["role"] == "tool");
    CHECK(m[5]["content"] == "PLAN");
    CHECK(m[5]["tool_call_id"] == m[4]["tool_calls"][0]["id"]);
    CHECK(p["tools"][0]["function"]["name"] == "transfer_to_human_agents");
}

TEST_CASE("anthropic payload shape") {
    ChatRequest req = agent_like_request();
    req.response_schema = json{{"type", "object"}};
    json p = anthropic_payload(req, "claude-test");
    CHECK(p["system"] == "SYSTEM");
    const auto& m = p["messages"];
    // user, assistant(tool_use), user(tool_result), assistant(think), user(plan)
    REQUIRE(m.size() == 5);
    CHECK(m[1]["content"][0]["type"] == "tool_use");
    CHECK(m[2]["content"][0]["type"] == "tool_result");
    CHECK(m[3]["content"][0]["name"] == "think");
    CHECK(m[4]["content"][0]["content"] == "PLAN");
    for (std::size_t i = 1; i < m.size(); ++i) CHECK(m[i]["role"] != m[i - 1]["role"]);
    CHECK(p["tool_choice"]["name"] == kStructuredOutputTool);
}

TEST_CASE("response parsing") {
    json oa{{"choices", {{{"message", {{"role", "assistant"}, {"content", "hello"}}}, {"finish_reason", "stop"}}}},
            {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 2}}}};
    auto r = openai_parse(oa);
    CHECK(r.text == "hello");
    CHECK(r.usage == Usage{7, 2});

    json oc{{"choices",
             {{{"message",
                {{"content", nullptr},
                 {"tool_calls", {{{"id", "t1"}, {"function", {{"name", "think"}, {"arguments", "{\"thought\":\"x\"}"}}}}}}}}}}}};
    auto c = openai_parse(oc);
    REQUIRE(c.kind == ModelResponse::Kind::ToolCalls);
    CHECK(c.tool_calls[0].arguments["thought"] == "x");
    CHECK_THROWS_AS(openai_parse(json{{"choices", json::array()}}), TransportError);
    CHECK_THROWS_AS(openai_parse(json{{"choices", {{{"message", {{"refusal", "no"}}}}}}}), ProviderRefusal);

    json an{{"content", {{{"type", "text"}, {"text", "hi"}}, {{"type", "tool_use"}, {"id", "u1"}, {"name", "think"}, {"input", {{"thought", "y"}}}}}},
            {"usage", {{"input_tokens", 3}, {"output_tokens", 4}}}};
    auto a = anthropic_parse(an);
    CHECK(a.kind == ModelResponse::Kind::ToolCalls);
    CHECK(a.usage == Usage{3, 4});
    json structured{{"content", {{{"type", "tool_use"}, {"name", kStructuredOutputTool}, {"input", {{"k", 1}}}}}}};
    CHECK(json::parse(anthropic_parse(structured).text)["k"] == 1);
    CHECK_THROWS_AS(anthropic_parse(json{{"stop_reason", "refusal"}, {"content", json::array()}}), ProviderRefusal);
}

TEST_CASE("http client against a local endpoint") {
    int status = 200;
    std::string seen_auth, seen_path;
    FakeProvider fake([&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_path = req.path;
        res.status = status;
        json body = json::parse(req.body);
        std::string last = body["messages"].back()["content"];
        res.set_content(json{{"choices", {{{"message", {{"content", "echo " + last}}}}}}}.dump(), "application/json");
    });
    ProviderConfig cfg{ProviderKind::OpenAI, fake.url(), "sk-test", std::chrono::seconds(5)};
    HttpChatClient client(cfg);
    ChatRequest req;
    req.model_id = "openai:gpt-test";
    req.messages.push_back(Message::user("ping"));

    CHECK(client.complete(req).text == "echo ping");
    CHECK(seen_auth == "Bearer sk-test");
    CHECK(seen_path == "/v1/chat/completions");
    status = 503;
    CHECK_THROWS_AS(client.complete(req), TransportError);
    status = 400;
    CHECK_THROWS_AS(client.complete(req), InvalidRequest);
    status = 401;
    CHECK_THROWS_AS(client.complete(req), GatewayError);

    HttpChatClient dead(ProviderConfig{ProviderKind::OpenAI, "http://127.0.0.1:1", "k", std::chrono::seconds(1)});
    CHECK_THROWS_AS(dead.complete(req), TransportError);
}
