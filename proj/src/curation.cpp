#include "rein/curation.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "rein/error.hpp"
#include "rein/text.hpp"

namespace rein {

// --- raw sessions ---------------------------------------------------------------

RawSession raw_session_from_json(const json& j) {
    RawSession s;
    s.id = j.at("id").get<std::string>();
    s.domain = domain_from_string(j.at("domain").get<std::string>());
    s.user_profile = j.value("user_profile", json::object());
    s.goal = j.contains("goal") ? j["goal"].get<std::string>() : j.value("instruction", "");
    const json& acts = j.contains("annotations") ? j["annotations"] : j.value("actions", json::array());
    for (const auto& a : acts) {
        json args = a.contains("arguments") ? a["arguments"] : a.value("kwargs", json::object());
        s.annotations.push_back(ControlAction::tool(a.at("name").get<std::string>(), args));
    }
    if (j.contains("outputs")) {
        const json& o = j["outputs"];
        s.outputs_key_present = !(o.is_null() || (o.is_array() && o.empty()) || (o.is_object() && o.empty()) ||
                                  (o.is_string() && o.get<std::string>().empty()));
    }
    s.requires_transfer = j.value("requires_transfer", false);
    for (const auto& a : s.annotations)
        if (a.invocation().tool_name == kTransferTool) s.requires_transfer = true;
    return s;
}

std::vector<RawSession> load_raw_sessions(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("raw session directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<RawSession> out;
    for (const auto& f : files) {
        try {
            out.push_back(raw_session_from_json(json::parse(read_text_file(f))));
        } catch (const json::exception& e) {
            throw ConfigError(f.string() + ": " + e.what());
        }
    }
    std::sort(out.begin(), out.end(), [](const RawSession& a, const RawSession& b) { return a.id < b.id; });
    return out;
}

MutatingLookup mutating_lookup(const std::map<Domain, ToolRegistry>& registries) {
    return [registries](Domain d, const std::string& name) {
        auto it = registries.find(d);
        if (it == registries.end()) return false;
        const ToolSpec* spec = it->second.find(name);
        return spec && spec->mutates_state && !spec->is_recovery;
    };
}

std::string_view to_string(FilterReason r) {
    switch (r) {
        case FilterReason::NoMutatingAnnotation: return "no_mutating_annotation";
        case FilterReason::OutputsKey: return "outputs_key";
        case FilterReason::RequiresTransfer: return "requires_transfer";
    }
    return "?";
}

std::optional<FilterReason> filter_reason(const RawSession& s, const MutatingLookup& is_mutating) {
    bool mutating = std::any_of(s.annotations.begin(), s.annotations.end(),
                                [&](const ControlAction& a) { return is_mutating(s.domain, a.invocation().tool_name); });
    if (!mutating) return FilterReason::NoMutatingAnnotation;
    if (s.outputs_key_present) return FilterReason::OutputsKey;
    if (s.requires_transfer) return FilterReason::RequiresTransfer;
    return std::nullopt;
}

std::vector<RawSession> filter_sessions(const std::vector<RawSession>& raw, const MutatingLookup& is_mutating) {
    std::vector<RawSession> out;
    for (const auto& s : raw)
        if (!filter_reason(s, is_mutating)) out.push_back(s);
    return out;
}

// --- generation ------------------------------------------------------------------

long long candidate_tokens(const std::vector<Utterance>& turns, const TokenCounter& counter) {
    long long n = 0;
    for (const auto& u : turns) n += counter(u.text());
    return n;
}

GenerationSetup load_generation_setup(const std::filesystem::path& prompts_dir) {
    GenerationSetup g;
    g.prompt_template = read_text_file(prompts_dir / "context_synthesis.md");
    try {
        g.demonstrations = json::parse(read_text_file(prompts_dir / "demons.json"));
    } catch (const json::parse_error& e) {
        throw ConfigError((prompts_dir / "demons.json").string() + ": " + e.what());
    }
    g.errors = load_error_definitions(prompts_dir / "errors.json");
    return g;
}

json context_schema() {
    return json{{"type", "object"},
                {"properties",
                 {{"turns",
                   {{"type", "array"},
                    {"items",
                     {{"type", "object"},
                      {"properties",
                       {{"speaker", {{"type", "string"}, {"enum", {"user", "agent"}}}}, {"text", {{"type", "string"}}}}},
                      {"required", {"speaker", "text"}}}}}}}},
                {"required", {"turns"}}};
}

namespace {

const ErrorType& find_error(const std::vector<ErrorType>& errors, ErrorId id) {
    for (const auto& e : errors)
        if (e.id == id) return e;
    return builtin_error_type(id);
}

std::string strip_fences(std::string s) {
    s = trim(s);
    if (s.rfind("```", 0) == 0) {
        auto nl = s.find('\n');
        s = nl == std::string::npos ? "" : s.substr(nl + 1);
        auto end = s.rfind("```");
        if (end != std::string::npos) s = s.substr(0, end);
    }
    return trim(s);
}

std::optional<std::vector<Utterance>> parse_generated(const std::string& text) {
    json j = json::parse(strip_fences(text), nullptr, false);
    if (j.is_discarded() || !validate_json(context_schema(), j).ok()) return std::nullopt;
    std::vector<Utterance> turns;
    for (const auto& t : j["turns"]) {
        std::string body = trim(t["text"].get<std::string>());
        if (body.empty()) return std::nullopt;
        turns.emplace_back(t["speaker"] == "user" ? Speaker::User : Speaker::Agent, body);
    }
    if (turns.empty()) return std::nullopt;
    return turns;
}

std::string format_turns(const std::vector<Utterance>& turns) {
    SurfaceContext s;
    s.turns = turns;
    return format_dialogue(s);
}

}  // namespace

ContextCandidate generate_context(ChatClient& client, const RawSession& session, ErrorId error_type,
                                  const std::vector<ToolSpec>& tools, const GenerationSetup& setup) {
    const ErrorType& et = find_error(setup.errors, error_type);
    std::string situation(to_string(situation_of(error_type)));
    const json& styles = setup.demonstrations.value("reply_styles", json::object());
    const json& demos = setup.demonstrations.value("demonstrations", json::object());
    std::string key(error_key(error_type));

    json annotations = json::array();
    for (const auto& a : session.annotations)
        annotations.push_back({{"name", a.invocation().tool_name}, {"arguments", a.invocation().arguments}});

    ChatRequest req;
    req.messages.push_back(Message::user(render_template(
        setup.prompt_template, {{"error_type", key},
                                {"error_name", et.name},
                                {"error_definition", et.description},
                                {"situation", situation},
                                {"reply_style", styles.value(situation, "")},
                                {"demonstration", demos.contains(key) ? demos[key].dump(2) : "{}"},
                                {"user_profile", session.user_profile.dump(2)},
                                {"user_goal", session.goal},
                                {"annotations", annotations.dump(2)},
                                {"tools", render_tool_list(tools)}})));
    req.temperature = setup.temperature;
    req.max_output_tokens = setup.max_output_tokens;
    req.model_id = setup.model_id;
    req.response_schema = context_schema();

    for (int attempt = 0; attempt < setup.max_attempts; ++attempt) {
        ModelResponse r = client.complete(req);
        if (r.kind != ModelResponse::Kind::Text) continue;
        auto turns = parse_generated(r.text);
        if (!turns) continue;
        ContextCandidate c;
        c.id = session.id + "-" + key;
        c.session_id = session.id;
        c.domain = session.domain;
        c.error_type = error_type;
        c.triple = std::move(*turns);
        c.token_count = candidate_tokens(c.triple, setup.counter);
        return c;
    }
    throw GenerationSchemaViolation("generator output for " + session.id + "/" + key + " violated the schema " +
                                    std::to_string(setup.max_attempts) + " times");
}

// --- QA --------------------------------------------------------------------------

std::string_view to_string(QaReason r) {
    switch (r) {
        case QaReason::TurnCount: return "turn_count";
        case QaReason::TokenBudget: return "token_budget";
        case QaReason::JudgeRejected: return "judge_rejected";
        case QaReason::JudgeUnavailable: return "judge_unavailable";
        case QaReason::AuthorRejected: return "author_rejected";
    }
    return "?";
}

JudgeSetup load_judge_setup(const std::filesystem::path& prompts_dir) {
    JudgeSetup j;
    j.prompt_template = read_text_file(prompts_dir / "context_filtering.md");
    j.errors = load_error_definitions(prompts_dir / "errors.json");
    return j;
}

json judge_schema() {
    return json{{"type", "object"},
                {"properties", {{"approved", {{"type", "boolean"}}}, {"reason", {{"type", "string"}}}}},
                {"required", {"approved"}}};
}

bool parse_judge_vote(const std::string& text) {
    std::string s = strip_fences(text);
    json j = json::parse(s, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("approved") && j["approved"].is_boolean())
        return j["approved"].get<bool>();
    std::string low = to_lower(s);
    return low.rfind("yes", 0) == 0 || low.rfind("approve", 0) == 0;
}

QaResult qa_filter(const ContextCandidate& candidate, const std::vector<ChatClient*>& judges, const JudgeSetup& setup) {
    QaResult res;
    res.candidate = candidate;
    auto reject = [&](QaReason r) {
        res.accepted = false;
        res.reason = r;
        return res;
    };
    const auto& t = candidate.triple;
    bool shape = t.size() == 3 && t[0].speaker() == Speaker::User && t[1].speaker() == Speaker::Agent &&
                 t[2].speaker() == Speaker::User;
    if (!shape) return reject(QaReason::TurnCount);
    res.candidate.token_count = candidate_tokens(t, setup.counter);
    if (res.candidate.token_count >= setup.token_limit) return reject(QaReason::TokenBudget);

    const ErrorType& et = find_error(setup.errors, candidate.error_type);
    std::string situation(to_string(situation_of(candidate.error_type)));
    std::string prompt = render_template(setup.prompt_template, {{"error_type", std::string(error_key(et.id))},
                                                                 {"error_name", et.name},
                                                                 {"error_definition", et.description},
                                                                 {"situation", situation},
                                                                 {"dialogue", format_turns(t)}});
    res.candidate.judge_votes.clear();
    for (std::size_t i = 0; i < judges.size(); ++i) {
        ChatRequest req;
        req.messages.push_back(Message::user(prompt));
        req.temperature = setup.temperature;
        req.max_output_tokens = setup.max_output_tokens;
        req.model_id = i < setup.model_ids.size() ? setup.model_ids[i] : "mock";
        req.response_schema = judge_schema();
        try {
            ModelResponse r = judges[i]->complete(req);
            res.candidate.judge_votes.push_back(r.kind == ModelResponse::Kind::Text && parse_judge_vote(r.text));
        } catch (const GatewayError&) {
            return reject(QaReason::JudgeUnavailable);
        }
    }
    if (std::find(res.candidate.judge_votes.begin(), res.candidate.judge_votes.end(), false) !=
        res.candidate.judge_votes.end())
        return reject(QaReason::JudgeRejected);

    if (setup.approvals) {
        auto it = setup.approvals->find(candidate.id);
        res.candidate.author_approved = it != setup.approvals->end() && it->second;
        if (!*res.candidate.author_approved) return reject(QaReason::AuthorRejected);
    }
    res.accepted = true;
    return res;
}

std::map<std::string, bool> load_review_file(const std::filesystem::path& file) {
    std::istringstream in(read_text_file(file));
    std::map<std::string, bool> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty() || trim(line)[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ConfigError(file.string() + ":" + std::to_string(n) + ": expected id<TAB>approve");
        std::string v = to_lower(trim(line.substr(tab + 1)));
        bool approve;
        if (v == "1" || v == "true" || v == "yes" || v == "approve")
            approve = true;
        else if (v == "0" || v == "false" || v == "no" || v == "reject")
            approve = false;
        else
            throw ConfigError(file.string() + ":" + std::to_string(n) + ": bad approval value '" + v + "'");
        out[trim(line.substr(0, tab))] = approve;
    }
    return out;
}

// --- splitting -----------------------------------------------------------------

DatasetSplit split_dataset(const std::vector<ContextCandidate>& accepted, long long token_limit, long long margin) {
    DatasetSplit out;
    struct Acc {
        std::set<std::string> sessions;
        std::size_t seen = 0, unseen = 0;
    };
    std::map<std::string, Acc> per;
    for (const auto& c : accepted) {
        bool seen = seen_by_default(c.error_type);
        (seen ? out.seen : out.unseen).push_back(c);
        auto& a = per[std::string(to_string(c.domain))];
        a.sessions.insert(c.session_id);
        (seen ? a.seen : a.unseen)++;
        if (c.token_count >= token_limit - margin && c.token_count <= token_limit + margin) ++out.near_token_bound;
    }
    SplitStatsRow total;
    total.domain = "total";
    for (const auto& [domain, a] : per) {
        SplitStatsRow row;
        row.domain = domain;
        row.sessions = a.sessions.size();
        row.seen = a.seen;
        row.unseen = a.unseen;
        total.sessions += row.sessions;
        total.seen += row.seen;
        total.unseen += row.unseen;
        out.stats.push_back(row);
    }
    out.stats.push_back(total);
    return out;
}

std::string split_stats_text(const DatasetSplit& split) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %9s %8s %8s %8s\n", "domain", "sessions", "seen", "unseen", "total");
    os << line;
    for (const auto& r : split.stats) {
        std::snprintf(line, sizeof line, "%-10s %9zu %8zu %8zu %8zu\n", r.domain.c_str(), r.sessions, r.seen, r.unseen,
                      r.total());
        os << line;
    }
    os << "\ncontexts within 10 tokens of the bound: " << split.near_token_bound << '\n';
    return os.str();
}

std::string split_stats_csv(const DatasetSplit& split) {
    std::ostringstream os;
    os << "domain,sessions,seen,unseen,total\n";
    for (const auto& r : split.stats)
        os << r.domain << ',' << r.sessions << ',' << r.seen << ',' << r.unseen << ',' << r.total() << '\n';
    return os.str();
}

Scenario candidate_to_scenario(const ContextCandidate& c, const RawSession& session, const MutatingLookup& is_mutating) {
    Scenario s;
    s.id = c.id;
    s.domain = c.domain;
    s.session_id = c.session_id;
    s.user_profile = session.user_profile;
    s.user_goal = session.goal;
    for (const auto& a : session.annotations)
        if (is_mutating(session.domain, a.invocation().tool_name)) s.ground_truth_actions.push_back(a);
    s.error_type = c.error_type;
    s.seen = seen_by_default(c.error_type);
    s.initial_context = c.triple;
    validate_scenario(s);
    return s;
}

}  // namespace rein
