#include "rein/simulation.hpp"

#include <algorithm>

#include "rein/error.hpp"
#include "rein/text.hpp"

namespace rein {

// --- scenarios ----------------------------------------------------------------

void validate_scenario(const Scenario& s) {
    if (s.id.empty()) throw InvalidValue("scenario without id");
    if (s.initial_context.size() != 3) throw InvalidValue(s.id + ": initial context must hold exactly 3 utterances");
    const Speaker expect[3] = {Speaker::User, Speaker::Agent, Speaker::User};
    for (int i = 0; i < 3; ++i)
        if (s.initial_context[i].speaker() != expect[i])
            throw InvalidValue(s.id + ": initial context must alternate user/agent/user");
    if (s.ground_truth_actions.empty()) throw InvalidValue(s.id + ": no ground truth actions");
    for (const auto& a : s.ground_truth_actions)
        if (!a.is_tool()) throw InvalidValue(s.id + ": ground truth holds a non-tool action");
    if (s.seen != seen_by_default(s.error_type)) throw InvalidValue(s.id + ": seen flag disagrees with error type");
}

json scenario_to_json(const Scenario& s) {
    json gt = json::array();
    for (const auto& a : s.ground_truth_actions) gt.push_back({{"name", a.invocation().tool_name}, {"arguments", a.invocation().arguments}});
    json ctx = json::array();
    for (const auto& u : s.initial_context) ctx.push_back(u);
    return json{{"id", s.id},
                {"domain", std::string(to_string(s.domain))},
                {"session_id", s.session_id},
                {"error_type", std::string(error_key(s.error_type))},
                {"situation", std::string(to_string(s.situation()))},
                {"seen", s.seen},
                {"user_profile", s.user_profile},
                {"user_goal", s.user_goal},
                {"ground_truth_actions", gt},
                {"initial_context", ctx}};
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    s.id = j.at("id").get<std::string>();
    s.domain = domain_from_string(j.at("domain").get<std::string>());
    s.session_id = j.value("session_id", s.id);
    s.error_type = error_id_from_string(j.at("error_type").get<std::string>());
    s.seen = j.contains("seen") ? j["seen"].get<bool>() : seen_by_default(s.error_type);
    s.user_profile = j.value("user_profile", json::object());
    s.user_goal = j.value("user_goal", "");
    for (const auto& a : j.at("ground_truth_actions")) s.ground_truth_actions.push_back(action_from_json(a));
    for (const auto& u : j.at("initial_context")) s.initial_context.push_back(utterance_from_json(u));
    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
    json j;
    try {
        j = json::parse(read_text_file(file));
        return scenario_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    } catch (const InvalidValue& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

void save_scenario(const std::filesystem::path& file, const Scenario& s) {
    write_file_atomic(file, scenario_to_json(s).dump(2) + "\n");
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("scenario directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<Scenario> out;
    for (const auto& f : files) out.push_back(load_scenario(f));
    std::sort(out.begin(), out.end(), [](const Scenario& a, const Scenario& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].id == out[i - 1].id) throw ConfigError("duplicate scenario id " + out[i].id);
    return out;
}

ExtendedContext seed_context(const Scenario& s) {
    validate_scenario(s);
    return ExtendedContext{}
        .append_user_turn(s.initial_context[0])
        .record_action(ControlAction::respond(s.initial_context[1].text()))
        .append_user_turn(s.initial_context[2]);
}

// --- verdicts -------------------------------------------------------------------

namespace {

constexpr std::pair<Reason, const char*> kReasonNames[] = {
    {Reason::GoalStateMatch, "goal_state_match"},
    {Reason::GoalStateMismatch, "goal_state_mismatch"},
    {Reason::ReportFiled, "report_filed"},
    {Reason::ReportMissing, "report_missing"},
    {Reason::TransferDone, "transfer_done"},
    {Reason::TransferMissing, "transfer_missing"},
    {Reason::WrongPlanUsed, "wrong_plan_used"},
    {Reason::PostTransferMutation, "post_transfer_mutation"},
    {Reason::PhrasePresent, "phrase_present"},
    {Reason::PhraseMissing, "phrase_missing"},
    {Reason::MaxStepsExceeded, "max_steps_exceeded"},
    {Reason::EpisodeAborted, "episode_aborted"},
};

}  // namespace

std::string_view to_string(Reason r) {
    for (const auto& [k, v] : kReasonNames)
        if (k == r) return v;
    return "?";
}

Reason reason_from_string(std::string_view s) {
    for (const auto& [k, v] : kReasonNames)
        if (s == v) return k;
    throw InvalidValue("unknown score reason '" + std::string(s) + "'");
}

bool ScoreVerdict::has(Reason r) const { return std::find(reasons.begin(), reasons.end(), r) != reasons.end(); }

bool is_hard_flag(const std::string& flag) { return flag == "max_steps_exceeded" || flag == "agent_gateway_error"; }

std::optional<std::string> first_post_injection_response(const ExtendedContext& ctx) {
    const auto& es = ctx.entries();
    std::size_t i = 0;
    while (i < es.size() && !es[i].is<entry::InceptionBlock>()) ++i;
    for (; i < es.size(); ++i)
        if (es[i].is<entry::AgentTurn>()) return es[i].as<entry::AgentTurn>().utterance.text();
    return std::nullopt;
}

ScoreVerdict score_episode(const EpisodeRecord& record, const Scenario& scenario, const ScoringRules& rules) {
    ScoreVerdict v;
    bool ok = true;
    auto add = [&](Reason r, bool good) {
        v.reasons.push_back(r);
        ok = ok && good;
    };
    bool digest_match = record.final_digest == record.expected_digest;
    bool phrase_rule = record.mode == "phrase_variant" && scenario.situation() == Situation::Ambiguous;

    if (phrase_rule) {
        auto reply = first_post_injection_response(record.transcript);
        bool present = false;
        if (reply) {
            present = rules.phrase_substring ? reply->find(rules.phrase) != std::string::npos
                                             : reply->rfind(rules.phrase, 0) == 0;
        }
        add(present ? Reason::PhrasePresent : Reason::PhraseMissing, present);
        add(digest_match ? Reason::GoalStateMatch : Reason::GoalStateMismatch, digest_match);
    } else if (scenario.situation() == Situation::Ambiguous) {
        add(record.report_count > 0 ? Reason::ReportFiled : Reason::ReportMissing, record.report_count > 0);
        add(digest_match ? Reason::GoalStateMatch : Reason::GoalStateMismatch, digest_match);
        if (record.transfer_flag) add(Reason::WrongPlanUsed, false);
    } else {
        add(record.transfer_flag ? Reason::TransferDone : Reason::TransferMissing, record.transfer_flag);
        if (record.report_count > 0) add(Reason::WrongPlanUsed, false);
        if (record.transfer_flag && record.transfer_seq) {
            bool mutated = std::any_of(record.audit_log.begin(), record.audit_log.end(),
                                       [&](const AuditRecord& a) { return a.seq > *record.transfer_seq; });
            if (mutated) add(Reason::PostTransferMutation, false);
        }
    }
    if (record.flags.count("max_steps_exceeded")) add(Reason::MaxStepsExceeded, false);
    if (record.flags.count("agent_gateway_error")) add(Reason::EpisodeAborted, false);
    v.pass = ok;
    return v;
}

// --- persistence ---------------------------------------------------------------

namespace {

json verdict_json(const ScoreVerdict& v) {
    json reasons = json::array();
    for (Reason r : v.reasons) reasons.push_back(std::string(to_string(r)));
    return {{"pass", v.pass}, {"reasons", reasons}};
}

ScoreVerdict score_from_json(const json& j) {
    ScoreVerdict v;
    v.pass = j.at("pass").get<bool>();
    for (const auto& r : j.at("reasons")) v.reasons.push_back(reason_from_string(r.get<std::string>()));
    return v;
}

}  // namespace

Transcript episode_to_transcript(const EpisodeRecord& r) {
    Transcript t;
    t.header.scenario_id = r.scenario_id;
    t.header.mode = r.mode;
    t.header.seeds = {{"episode", r.seed}};
    t.context = r.transcript;
    json acts = json::array();
    for (const auto& a : r.activations) acts.push_back({{"turn", a.turn}, {"verdict", verdict_to_json(a.verdict)}});
    json audit = json::array();
    for (const auto& a : r.audit_log) audit.push_back({{"seq", a.seq}, {"tool", a.tool}, {"arguments", a.arguments}});
    json tr{{"domain", std::string(to_string(r.domain))},
            {"error_type", std::string(error_key(r.error_type))},
            {"seen", r.seen},
            {"activations", acts},
            {"final_digest", r.final_digest},
            {"expected_digest", r.expected_digest},
            {"report_count", r.report_count},
            {"transfer_flag", r.transfer_flag},
            {"transfer_seq", r.transfer_seq ? json(*r.transfer_seq) : json(nullptr)},
            {"audit_log", audit},
            {"flags", r.flags}};
    if (r.verdict) tr["verdict"] = verdict_json(*r.verdict);
    t.trailer = tr;
    return t;
}

EpisodeRecord episode_from_transcript(const Transcript& t) {
    if (!t.trailer) throw MissingRecords("episode " + t.header.scenario_id + " has no episode trailer");
    const json& tr = *t.trailer;
    EpisodeRecord r;
    try {
        r.scenario_id = t.header.scenario_id;
        r.mode = t.header.mode;
        r.seed = t.header.seeds.value("episode", std::uint64_t{0});
        r.transcript = t.context;
        r.domain = domain_from_string(tr.at("domain").get<std::string>());
        r.error_type = error_id_from_string(tr.at("error_type").get<std::string>());
        r.seen = tr.at("seen").get<bool>();
        for (const auto& a : tr.at("activations"))
            r.activations.push_back({a.at("turn").get<std::size_t>(), verdict_from_json(a.at("verdict"))});
        r.final_digest = tr.at("final_digest").get<std::string>();
        r.expected_digest = tr.at("expected_digest").get<std::string>();
        r.report_count = tr.at("report_count").get<std::size_t>();
        r.transfer_flag = tr.at("transfer_flag").get<bool>();
        if (!tr.at("transfer_seq").is_null()) r.transfer_seq = tr["transfer_seq"].get<std::size_t>();
        for (const auto& a : tr.at("audit_log"))
            r.audit_log.push_back({a.at("seq").get<std::size_t>(), a.at("tool").get<std::string>(), a.at("arguments")});
        r.flags = tr.at("flags").get<std::set<std::string>>();
        if (tr.contains("verdict")) r.verdict = score_from_json(tr["verdict"]);
    } catch (const json::exception& e) {
        throw MalformedArtifact(std::string("bad episode trailer: ") + e.what(), 0);
    }
    return r;
}

void save_episode(const std::filesystem::path& file, const EpisodeRecord& r) {
    save_transcript(file, episode_to_transcript(r));
}

EpisodeRecord load_episode(const std::filesystem::path& file) { return episode_from_transcript(load_transcript(file)); }

// --- user simulation ------------------------------------------------------------

std::optional<Utterance> simulate_user(ChatClient& client, const UserSimConfig& cfg, const json& profile,
                                       const std::string& goal, const SurfaceContext& surface) {
    if (surface.turns.empty() || surface.turns.back().speaker() != Speaker::Agent)
        throw OrderViolation("user simulator called while the agent has not replied");
    ChatRequest req;
    req.system_prompt = render_template(cfg.system_template, {{"instruction", goal}, {"profile", profile.dump(2)}});
    // The simulator plays the user, so roles are mirrored.
    req.messages.push_back(Message::user(cfg.opening));
    for (const auto& m : render_surface(surface))
        req.messages.push_back(m.role == Role::User ? Message::assistant(m.content) : Message::user(m.content));
    req.temperature = cfg.temperature;
    req.max_output_tokens = cfg.max_output_tokens;
    req.model_id = cfg.model_id;

    ModelResponse r = client.complete(req);
    if (r.kind != ModelResponse::Kind::Text) throw GatewayError("user simulator answered with tool calls");
    if (r.text.find(cfg.stop_token) != std::string::npos || trim(r.text).empty()) return std::nullopt;
    return Utterance::user(trim(r.text));
}

// --- episodes ------------------------------------------------------------------

EpisodeRecord run_episode(const Scenario& scenario, const RunMode& mode, const EpisodeClients& clients,
                          const EpisodeSetup& setup) {
    if (!setup.registry || !setup.initial_env || !clients.agent || !clients.user)
        throw ConfigError("episode setup is incomplete");
    if (mode.uses_inception() && (!clients.inception || !setup.inception))
        throw ConfigError("mode " + mode.tag() + " needs an inception module");

    const ToolRegistry& full = *setup.registry;
    ToolRegistry agent_tools =
        mode.kind == ModeKind::PhraseVariantReIn ? full.without(kReportTool) : full;
    Environment expected = apply_ground_truth(*setup.initial_env, full, scenario.ground_truth_actions);

    EpisodeRecord rec;
    rec.scenario_id = scenario.id;
    rec.mode = mode.tag();
    rec.seed = setup.seed;
    rec.domain = scenario.domain;
    rec.error_type = scenario.error_type;
    rec.seen = scenario.seen;
    rec.expected_digest = state_digest(expected);

    ExtendedContext ctx = seed_context(scenario);
    Environment env = *setup.initial_env;
    InceptionHook hook{clients.inception, setup.inception};

    for (;;) {
        std::size_t t = ctx.turn_count();
        try {
            TurnOutput o = run_turn(*clients.agent, ctx, env, agent_tools, mode, t, setup.agent, hook);
            ctx = std::move(o.ctx);
            env = std::move(o.env);
            if (o.result.verdict) {
                for (const auto& f : o.result.verdict->flags) rec.flags.insert(f);
                rec.activations.push_back({t, *o.result.verdict});
            }
            if (o.result.max_steps_exceeded) rec.flags.insert("max_steps_exceeded");
        } catch (const GatewayError&) {
            rec.flags.insert("agent_gateway_error");
            break;
        }
        if (t >= setup.max_turns) {
            rec.flags.insert("max_turns_reached");
            break;
        }
        std::optional<Utterance> next;
        try {
            next = simulate_user(*clients.user, setup.user, scenario.user_profile, scenario.user_goal, ctx.surface_view());
        } catch (const GatewayError&) {
            rec.flags.insert("user_gateway_error");
            break;
        }
        if (!next) break;
        ctx = ctx.append_user_turn(*next);
    }

    rec.transcript = ctx;
    rec.final_digest = state_digest(env);
    rec.report_count = env.report_log().size();
    rec.transfer_flag = env.transfer_flag();
    rec.transfer_seq = env.transfer_seq();
    rec.audit_log = env.audit_log();
    if (rec.report_count > 0 && rec.transfer_flag) rec.flags.insert("both_recovery_tools");
    rec.verdict = score_episode(rec, scenario, setup.scoring);
    return rec;
}

}  // namespace rein
