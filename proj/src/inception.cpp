#include "rein/inception.hpp"

#include <algorithm>
#include <sstream>

#include "rein/error.hpp"
#include "rein/text.hpp"

namespace rein {

std::string_view error_key(ErrorId id) {
    switch (id) {
        case ErrorId::Anaphora: return "anaphora";
        case ErrorId::MultipleInterpretation: return "multiple_interpretation";
        case ErrorId::Contradiction: return "contradiction";
        case ErrorId::UnsupportedAction: return "unsupported_action";
        case ErrorId::UnsupportedParameter: return "unsupported_parameter";
        case ErrorId::UnsupportedDomain: return "unsupported_domain";
    }
    return "?";
}

std::optional<ErrorId> try_error_id(std::string_view s) {
    std::string k = to_lower(trim(s));
    std::replace(k.begin(), k.end(), ' ', '_');
    std::replace(k.begin(), k.end(), '-', '_');
    // models often echo bracketed or quoted ids
    k.erase(std::remove_if(k.begin(), k.end(), [](char c) { return c == '"' || c == '\'' || c == '[' || c == ']' || c == '`' || c == '.'; }),
            k.end());
    for (ErrorId id : kAllErrorIds)
        if (k == error_key(id)) return id;
    if (k == "action") return ErrorId::UnsupportedAction;
    if (k == "parameter") return ErrorId::UnsupportedParameter;
    if (k == "domain") return ErrorId::UnsupportedDomain;
    if (k == "interpretation") return ErrorId::MultipleInterpretation;
    return std::nullopt;
}

ErrorId error_id_from_string(std::string_view s) {
    auto id = try_error_id(s);
    if (!id) throw InvalidValue("unknown error type '" + std::string(s) + "'");
    return *id;
}

std::string_view to_string(Situation s) { return s == Situation::Ambiguous ? "ambiguous" : "unsupported"; }

Situation situation_from_string(std::string_view s) {
    std::string k = to_lower(trim(s));
    if (k == "ambiguous" || k == "ambiguous request") return Situation::Ambiguous;
    if (k == "unsupported" || k == "unsupported request") return Situation::Unsupported;
    throw InvalidValue("unknown user situation '" + std::string(s) + "'");
}

Situation situation_of(ErrorId id) {
    switch (id) {
        case ErrorId::Anaphora:
        case ErrorId::MultipleInterpretation:
        case ErrorId::Contradiction: return Situation::Ambiguous;
        default: return Situation::Unsupported;
    }
}

bool seen_by_default(ErrorId id) { return id != ErrorId::Contradiction && id != ErrorId::UnsupportedDomain; }

const std::vector<ErrorType>& builtin_error_types() {
    static const std::vector<ErrorType> types = {
        {ErrorId::Anaphora, "Anaphora", Situation::Ambiguous, true,
         "Occurs when the user employs demonstrative pronouns (e.g., this, that, these, those) without clear "
         "antecedents, causing the agent to identify and address the wrong service or entity."},
        {ErrorId::MultipleInterpretation, "Multiple Interpretation", Situation::Ambiguous, true,
         "Occurs when a user query can reasonably be interpreted in multiple ways, leading to uncertainty about "
         "which specific action or service the user is requesting."},
        {ErrorId::Contradiction, "Contradiction", Situation::Ambiguous, false,
         "Occurs when user requests contain conflicting information or intentions, making it difficult or "
         "impossible to maintain coherent dialogue state or fulfill the request accurately."},
        {ErrorId::UnsupportedAction, "Action", Situation::Unsupported, true,
         "Occurs when the user requests an action that cannot be performed within an otherwise supported domain "
         "or service."},
        {ErrorId::UnsupportedParameter, "Parameter", Situation::Unsupported, true,
         "Occurs when the system supports the requested action in principle, but cannot accommodate the specific "
         "parameters, configurations, or options requested by the user."},
        {ErrorId::UnsupportedDomain, "Domain", Situation::Unsupported, false,
         "Occurs when user requests pertain to subject areas or domains that are outside the system's defined "
         "operational capabilities."},
    };
    return types;
}

const ErrorType& builtin_error_type(ErrorId id) {
    for (const auto& e : builtin_error_types())
        if (e.id == id) return e;
    throw InvalidValue("unknown error id");
}

RecoveryPlanTag plan_for(ErrorId id) {
    return situation_of(id) == Situation::Ambiguous ? RecoveryPlanTag::InternalReport : RecoveryPlanTag::HumanTransfer;
}

// --- verdict serialization ----------------------------------------------------

json verdict_to_json(const InceptionVerdict& v) {
    json j{{"decision", v.yes() ? "yes" : "no"}, {"raw_text", v.raw_text}, {"flags", v.flags}};
    if (v.plan) j["plan"] = {{"tag", std::string(to_string(v.plan->tag))}, {"text", v.plan->instantiated_text}};
    if (v.detected_error) j["error_type"] = std::string(error_key(*v.detected_error));
    return j;
}

InceptionVerdict verdict_from_json(const json& j) {
    InceptionVerdict v;
    v.decision = j.at("decision").get<std::string>() == "yes" ? Decision::Yes : Decision::No;
    v.raw_text = j.value("raw_text", "");
    if (j.contains("flags")) v.flags = j["flags"].get<std::set<std::string>>();
    if (j.contains("plan"))
        v.plan = RecoveryPlan{recovery_plan_tag_from_string(j["plan"].at("tag").get<std::string>()),
                              j["plan"].at("text").get<std::string>()};
    if (j.contains("error_type")) v.detected_error = error_id_from_string(j["error_type"].get<std::string>());
    if (v.yes() && !v.plan) throw InvalidValue("yes verdict without a plan");
    return v;
}

// --- definition files ---------------------------------------------------------

std::vector<ErrorType> load_error_definitions(const std::filesystem::path& file) {
    json doc;
    try {
        doc = json::parse(read_text_file(file));
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    std::vector<ErrorType> out;
    for (const auto& e : doc.at("errors")) {
        ErrorType t;
        t.id = error_id_from_string(e.at("id").get<std::string>());
        t.name = e.at("name").get<std::string>();
        t.situation = situation_from_string(e.at("situation").get<std::string>());
        t.seen = e.at("seen").get<bool>();
        t.description = e.at("description").get<std::string>();
        if (t.situation != situation_of(t.id))
            throw ConfigError(file.string() + ": " + std::string(error_key(t.id)) + " has the wrong situation");
        if (t.seen != seen_by_default(t.id))
            throw ConfigError(file.string() + ": " + std::string(error_key(t.id)) + " has the wrong seen flag");
        if (trim(t.description).empty()) throw ConfigError(file.string() + ": empty description");
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<PlanDefinition> load_plan_definitions(const std::filesystem::path& file) {
    json doc;
    try {
        doc = json::parse(read_text_file(file));
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    std::vector<PlanDefinition> out;
    for (const auto& p : doc.at("plans")) {
        PlanDefinition d;
        d.situation = situation_from_string(p.at("situation").get<std::string>());
        d.tag = recovery_plan_tag_from_string(p.at("tag").get<std::string>());
        d.name = p.at("name").get<std::string>();
        d.description = p.at("description").get<std::string>();
        out.push_back(std::move(d));
    }
    return out;
}

InceptionSetup load_inception_setup(const std::filesystem::path& prompts_dir, bool include_unseen, bool phrase_plans) {
    InceptionSetup s;
    s.prompt_template = read_text_file(prompts_dir / "inception.md");
    for (auto& e : load_error_definitions(prompts_dir / "errors.json"))
        if (e.seen || include_unseen) s.errors.push_back(std::move(e));
    s.plans = load_plan_definitions(prompts_dir / (phrase_plans ? "plans_phrase.json" : "plans.json"));
    return s;
}

// --- prompt construction --------------------------------------------------------

namespace {

std::string situation_heading(Situation s) { return s == Situation::Ambiguous ? "Ambiguous Request" : "Unsupported Request"; }

}  // namespace

std::string render_error_definitions(const std::vector<ErrorType>& errors) {
    json doc = json::object();
    for (const auto& e : errors) {
        auto& group = doc[situation_heading(e.situation)];
        if (group.is_null()) group = json::array();
        group.push_back({{"error_type", std::string(error_key(e.id))}, {"name", e.name}, {"description", e.description}});
    }
    return doc.dump(2);
}

std::string render_plan_definitions(const std::vector<PlanDefinition>& plans) {
    json doc = json::object();
    for (const auto& p : plans)
        doc[situation_heading(p.situation)] = {{"recovery_plan", p.name}, {"description", p.description}};
    return doc.dump(2);
}

std::string render_tool_list(const std::vector<ToolSpec>& tools) {
    json arr = json::array();
    for (const auto& t : tools) arr.push_back(tool_schema_json(t));
    return arr.dump(2);
}

ChatRequest build_inception_prompt(const SurfaceContext& surface, const Utterance& u_t,
                                   const std::vector<ToolSpec>& tools, const InceptionSetup& setup) {
    SurfaceContext full = surface;
    full.turns.push_back(u_t);
    std::string prompt = render_template(setup.prompt_template, {{"context", format_dialogue(full)},
                                                                 {"utterance", u_t.text()},
                                                                 {"tools", render_tool_list(tools)},
                                                                 {"errors", render_error_definitions(setup.errors)},
                                                                 {"plans", render_plan_definitions(setup.plans)}});
    ChatRequest req;
    req.messages.push_back(Message::user(std::move(prompt)));
    req.temperature = setup.temperature;
    req.max_output_tokens = setup.max_output_tokens;
    req.model_id = setup.model_id;
    return req;
}

// --- verdict parsing --------------------------------------------------------------

namespace {

InceptionVerdict fallback(const std::string& raw) {
    InceptionVerdict v;
    v.raw_text = raw;
    v.flags.insert("parse_fallback");
    return v;
}

std::string strip_markup(std::string s) {
    s = trim(s);
    while (!s.empty() && (s.front() == '*' || s.front() == '#' || s.front() == '-' || s.front() == '>')) s = trim(s.substr(1));
    return s;
}

std::string strip_trailing_markup(std::string s) {
    s = trim(s);
    while (!s.empty() && (s.back() == '*' || s.back() == '.')) s.pop_back();
    return trim(s);
}

InceptionVerdict finish_yes(const std::string& raw, const std::string& error_text, const std::string& plan_text) {
    std::string plan = trim(plan_text);
    if (plan.empty() || to_lower(strip_trailing_markup(plan)) == "none") return fallback(raw);
    InceptionVerdict v;
    v.decision = Decision::Yes;
    v.raw_text = raw;
    if (!error_text.empty()) v.detected_error = try_error_id(strip_trailing_markup(error_text));
    RecoveryPlanTag tag;
    if (v.detected_error) {
        tag = plan_for(*v.detected_error);
    } else {
        v.flags.insert("plan_tag_inferred");
        std::string low = to_lower(plan);
        bool transfer = low.find("transfer") != std::string::npos || low.find("human agent") != std::string::npos;
        tag = transfer ? RecoveryPlanTag::HumanTransfer : RecoveryPlanTag::InternalReport;
    }
    v.plan = RecoveryPlan{tag, plan};
    return v;
}

std::optional<InceptionVerdict> parse_json_verdict(const std::string& raw, const std::string& body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("decision") || !j["decision"].is_string()) return std::nullopt;
    std::string d = to_lower(trim(j["decision"].get<std::string>()));
    if (d == "no") {
        InceptionVerdict v;
        v.raw_text = raw;
        return v;
    }
    if (d != "yes") return fallback(raw);
    std::string err = j.contains("error_type") && j["error_type"].is_string() ? j["error_type"].get<std::string>() : "";
    std::string plan = j.contains("plan") && j["plan"].is_string() ? j["plan"].get<std::string>() : "";
    return finish_yes(raw, err, plan);
}

}  // namespace

InceptionVerdict parse_verdict(const std::string& raw) {
    std::string body = trim(raw);
    if (body.empty()) return fallback(raw);
    if (body.front() == '{') {
        if (auto v = parse_json_verdict(raw, body)) return *v;
        return fallback(raw);
    }

    std::optional<std::string> decision;
    std::string error_text, plan_text;
    bool in_plan = false;
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        std::string s = strip_markup(line);
        auto value_after = [&](std::string_view key) -> std::optional<std::string> {
            if (!istarts_with(s, key)) return std::nullopt;
            std::string rest = s.substr(key.size());
            // tolerate "**DECISION:** Yes"
            while (!rest.empty() && rest.front() == '*') rest.erase(0, 1);
            return trim(rest);
        };
        if (auto d = value_after("DECISION:")) {
            decision = *d;
            in_plan = false;
        } else if (auto e = value_after("ERROR:")) {
            error_text = *e;
            in_plan = false;
        } else if (auto p = value_after("PLAN:")) {
            plan_text = *p;
            in_plan = true;
        } else if (in_plan) {
            plan_text += "\n" + line;
        }
    }

    if (!decision) {
        std::string only = to_lower(strip_trailing_markup(body));
        if (only == "no") {
            InceptionVerdict v;
            v.raw_text = raw;
            return v;
        }
        return fallback(raw);
    }
    std::string d = to_lower(strip_trailing_markup(*decision));
    if (d == "no") {
        InceptionVerdict v;
        v.raw_text = raw;
        return v;
    }
    if (d != "yes") return fallback(raw);
    return finish_yes(raw, error_text, plan_text);
}

InceptionResult run_inception(ChatClient& client, const ExtendedContext& ctx, const std::vector<ToolSpec>& tools,
                              const InceptionSetup& setup) {
    if (!ctx.turn_open()) throw OrderViolation("inception needs an open turn");
    SurfaceContext surface = ctx.surface_view();
    Utterance u_t = surface.turns.back();
    surface.turns.pop_back();
    ChatRequest req = build_inception_prompt(surface, u_t, tools, setup);

    InceptionResult out;
    try {
        ModelResponse r = client.complete(req);
        if (r.kind == ModelResponse::Kind::ToolCalls) {
            out.verdict = fallback(response_to_json(r).dump());
        } else {
            out.verdict = parse_verdict(r.text);
        }
    } catch (const TransportError& e) {
        out.verdict.raw_text = e.what();
        out.verdict.flags.insert("gateway_failed");
    }
    if (out.verdict.yes()) out.block = InceptionBlock{out.verdict.plan->instantiated_text};
    return out;
}

}  // namespace rein
