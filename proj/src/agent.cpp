#include "rein/agent.hpp"

#include "rein/error.hpp"
#include "rein/text.hpp"

namespace rein {

std::string RunMode::tag() const {
    switch (kind) {
        case ModeKind::Baseline: return "baseline";
        case ModeKind::TargetedReIn: return "targeted";
        case ModeKind::DynamicReIn: return "dynamic";
        case ModeKind::NaivePromptInstruction: return "npi";
        case ModeKind::SelfRefine: return "self_refine";
        case ModeKind::PhraseVariantReIn: return "phrase_variant";
    }
    return "?";
}

RunMode RunMode::parse(std::string_view tag) {
    std::string t = to_lower(trim(tag));
    if (t == "baseline") return {ModeKind::Baseline};
    if (t == "targeted" || t == "rein") return {ModeKind::TargetedReIn};
    if (t == "dynamic") return {ModeKind::DynamicReIn};
    if (t == "npi") return {ModeKind::NaivePromptInstruction};
    if (t == "self_refine" || t == "sr") return {ModeKind::SelfRefine};
    if (t == "phrase_variant" || t == "phrase") return {ModeKind::PhraseVariantReIn};
    throw ConfigError("unknown mode '" + std::string(tag) + "'");
}

bool RunMode::uses_inception() const {
    return kind == ModeKind::TargetedReIn || kind == ModeKind::DynamicReIn || kind == ModeKind::PhraseVariantReIn;
}

bool RunMode::inception_due(std::size_t turn) const {
    switch (kind) {
        case ModeKind::TargetedReIn: return turn == turn_index;
        case ModeKind::DynamicReIn:
        case ModeKind::PhraseVariantReIn: return true;
        default: return false;
    }
}

std::string effective_system_prompt(const RunMode& mode, const AgentConfig& cfg) {
    if (mode.kind != ModeKind::NaivePromptInstruction) return cfg.base_system_prompt;
    return cfg.base_system_prompt + "\n\n" + cfg.npi_block;
}

namespace {

struct LoopState {
    ExtendedContext ctx;
    Environment env;
    TurnResult res;
};

ChatRequest policy_request(const std::string& system, const ExtendedContext& ctx, const ToolRegistry& registry,
                           const AgentConfig& cfg) {
    ChatRequest req;
    req.system_prompt = system;
    req.messages = render_context(ctx, RenderRole::TaskAgent);
    req.tool_specs = registry.specs();
    req.temperature = cfg.temperature;
    req.max_output_tokens = cfg.max_output_tokens;
    req.model_id = cfg.model_id;
    return req;
}

void execute_calls(LoopState& st, const ToolRegistry& registry, const std::vector<ToolCall>& calls) {
    for (const auto& call : calls) {
        ControlAction a = ControlAction::tool(call.name, call.arguments);
        ToolOutcome outcome;
        if (!registry.find(call.name)) {
            // The model sees the failure and may recover on the next step.
            outcome = {ToolStatus::ValidationError, json::object(), "unknown tool '" + call.name + "'"};
        } else {
            InvokeResult r = invoke_tool(st.env, registry, call.name, call.arguments);
            st.env = std::move(r.env);
            outcome = std::move(r.outcome);
        }
        st.ctx = st.ctx.record_action(a, outcome.to_json());
        st.res.steps.push_back({std::move(a), std::move(outcome)});
    }
}

std::string nonblank(const std::string& text) { return trim(text).empty() ? std::string("...") : text; }

// Samples until the policy answers in text; that text is returned unrecorded.
std::optional<std::string> decide(ChatClient& policy, LoopState& st, const ToolRegistry& registry,
                                  const std::string& system, const AgentConfig& cfg) {
    while (st.res.step_count < cfg.max_steps) {
        ModelResponse r = policy.complete(policy_request(system, st.ctx, registry, cfg));
        ++st.res.step_count;
        if (r.kind == ModelResponse::Kind::Text) return nonblank(r.text);
        execute_calls(st, registry, r.tool_calls);
    }
    return std::nullopt;
}

void close_turn(LoopState& st, const std::string& text) {
    ControlAction a = ControlAction::respond(text);
    st.ctx = st.ctx.record_action(a);
    st.res.steps.push_back({std::move(a), std::nullopt});
    st.res.response = Utterance::agent(text);
}

void finish(LoopState& st, const std::optional<std::string>& text, const AgentConfig& cfg) {
    if (text) {
        close_turn(st, *text);
    } else {
        st.res.max_steps_exceeded = true;
        close_turn(st, cfg.max_steps_message);
    }
}

LoopState start(const ExtendedContext& ctx, const Environment& env) {
    if (!ctx.turn_open()) throw OrderViolation("run_turn needs an open turn ending in a user utterance");
    return LoopState{ctx, env, TurnResult{Utterance::agent("..."), {}, false, std::nullopt, 0, false}};
}

ModelResponse refine_call(ChatClient& policy, const LoopState& st, const std::string& prompt,
                          const std::vector<ToolSpec>& tools, const AgentConfig& cfg) {
    ChatRequest req;
    req.system_prompt = cfg.base_system_prompt;
    req.messages = render_context(st.ctx, RenderRole::TaskAgent);
    req.messages.push_back(Message::user(prompt));
    req.tool_specs = tools;
    req.temperature = cfg.temperature;
    req.max_output_tokens = cfg.max_output_tokens;
    req.model_id = cfg.model_id;
    return policy.complete(req);
}

}  // namespace

TurnOutput run_turn(ChatClient& policy, const ExtendedContext& ctx, const Environment& env,
                    const ToolRegistry& registry, const RunMode& mode, std::size_t turn_index, const AgentConfig& cfg,
                    InceptionHook inception) {
    if (mode.kind == ModeKind::SelfRefine && turn_index == mode.turn_index)
        return self_refine_turn(policy, ctx, env, registry, cfg);

    LoopState st = start(ctx, env);
    if (mode.inception_due(turn_index)) {
        if (!inception.client || !inception.setup) throw ConfigError("mode " + mode.tag() + " needs an inception module");
        InceptionResult ir = run_inception(*inception.client, st.ctx, registry.specs(), *inception.setup);
        st.res.verdict = ir.verdict;
        if (ir.block) {
            st.ctx = st.ctx.inject_inception(ir.block);
            st.res.inception_fired = true;
        }
    }
    auto text = decide(policy, st, registry, effective_system_prompt(mode, cfg), cfg);
    finish(st, text, cfg);
    return {std::move(st.res), std::move(st.ctx), std::move(st.env)};
}

TurnOutput self_refine_turn(ChatClient& policy, const ExtendedContext& ctx, const Environment& env,
                            const ToolRegistry& registry, const AgentConfig& cfg) {
    LoopState st = start(ctx, env);
    auto draft = decide(policy, st, registry, cfg.base_system_prompt, cfg);
    if (!draft) {
        finish(st, draft, cfg);
        return {std::move(st.res), std::move(st.ctx), std::move(st.env)};
    }
    st.ctx = st.ctx.record_note({"draft", *draft});
    std::string dialogue = format_dialogue(st.ctx.surface_view());

    ModelResponse fb = refine_call(policy, st,
                                   render_template(cfg.sr_feedback_template, {{"draft", *draft}, {"context", dialogue}}),
                                   {}, cfg);
    std::string feedback = fb.kind == ModelResponse::Kind::Text ? trim(fb.text) : cfg.no_issues_marker;
    st.ctx = st.ctx.record_note({"feedback", feedback.empty() ? cfg.no_issues_marker : feedback});
    if (feedback.empty() || feedback.find(cfg.no_issues_marker) != std::string::npos) {
        close_turn(st, *draft);
        return {std::move(st.res), std::move(st.ctx), std::move(st.env)};
    }

    ModelResponse rv = refine_call(
        policy, st,
        render_template(cfg.sr_revision_template, {{"draft", *draft}, {"feedback", feedback}, {"context", dialogue}}),
        registry.specs(), cfg);
    if (rv.kind == ModelResponse::Kind::Text) {
        close_turn(st, nonblank(rv.text));
    } else {
        // A revision may act first (e.g. file a report); the ordinary loop then resumes.
        execute_calls(st, registry, rv.tool_calls);
        finish(st, decide(policy, st, registry, cfg.base_system_prompt, cfg), cfg);
    }
    return {std::move(st.res), std::move(st.ctx), std::move(st.env)};
}

}  // namespace rein
