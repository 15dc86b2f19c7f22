#include "rein/dialogue.hpp"

#include <algorithm>
#include <cctype>

#include "rein/error.hpp"

namespace rein {

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string_view to_string(Speaker s) { return s == Speaker::User ? "user" : "agent"; }

Utterance::Utterance(Speaker speaker, std::string text) : speaker_(speaker), text_(std::move(text)) {
    if (blank(text_)) throw InvalidValue("utterance text must be non-empty");
}

std::string_view kind_name(const ContextEntry& e) {
    return std::visit(overloaded{
                          [](const entry::UserTurn&) { return std::string_view("user_turn"); },
                          [](const entry::AgentTurn&) { return std::string_view("agent_turn"); },
                          [](const entry::Action&) { return std::string_view("action"); },
                          [](const entry::ToolOutput&) { return std::string_view("tool_output"); },
                          [](const entry::InceptionBlock&) { return std::string_view("inception_block"); },
                          [](const entry::RefineNote&) { return std::string_view("refine_note"); },
                      },
                      e.body);
}

std::pair<std::size_t, std::size_t> ExtendedContext::turn_range(std::size_t turn) const {
    if (turn == 0 || turn > boundaries_.size()) return {entries_.size(), entries_.size()};
    std::size_t first = boundaries_[turn - 1];
    std::size_t last = turn < boundaries_.size() ? boundaries_[turn] : entries_.size();
    return {first, last};
}

bool ExtendedContext::has_inception_in_current_turn() const {
    if (boundaries_.empty()) return false;
    auto [first, last] = turn_range(boundaries_.size());
    for (std::size_t i = first; i < last; ++i)
        if (entries_[i].is<entry::InceptionBlock>()) return true;
    return false;
}

bool ExtendedContext::has_action_in_current_turn() const {
    if (boundaries_.empty()) return false;
    auto [first, last] = turn_range(boundaries_.size());
    for (std::size_t i = first; i < last; ++i)
        if (entries_[i].is<entry::Action>()) return true;
    return false;
}

ExtendedContext ExtendedContext::append_user_turn(const Utterance& u) const {
    if (u.speaker() != Speaker::User) throw OrderViolation("append_user_turn requires a user utterance");
    if (open_) throw OrderViolation("two consecutive user turns");
    ExtendedContext next = *this;
    next.boundaries_.push_back(next.entries_.size());
    next.entries_.push_back({next.boundaries_.size(), entry::UserTurn{u}});
    next.open_ = true;
    return next;
}

ExtendedContext ExtendedContext::inject_inception(const std::optional<InceptionBlock>& block) const {
    if (!block) return *this;
    if (!open_) throw TurnClosed("inception requires an open turn");
    if (has_inception_in_current_turn()) throw DoubleInjection("an inception block already exists in this turn");
    if (has_action_in_current_turn()) throw LateInjection("control actions were already recorded in this turn");
    if (entries_.size() != boundaries_.back() + 1) throw LateInjection("the block must directly follow the user turn");
    if (block->plan_text.empty()) throw InvalidValue("inception block text must be non-empty");
    ExtendedContext next = *this;
    next.entries_.push_back({boundaries_.size(), *block});
    return next;
}

ExtendedContext ExtendedContext::record_action(const ControlAction& a, const std::optional<json>& output) const {
    if (!open_) throw TurnClosed("record_action requires an open turn");
    if (a.is_respond() && output) throw OutputWithoutInvocation("a Respond action cannot carry a tool output");
    if (a.is_tool() && a.invocation().tool_name.empty()) throw InvalidValue("tool invocation needs a name");
    ExtendedContext next = *this;
    std::size_t turn = boundaries_.size();
    std::size_t action_index = next.entries_.size();
    next.entries_.push_back({turn, entry::Action{a}});
    if (a.is_tool()) {
        if (output) next.entries_.push_back({turn, entry::ToolOutput{action_index, *output}});
    } else {
        next.entries_.push_back({turn, entry::AgentTurn{Utterance::agent(a.response().text)}});
        next.open_ = false;
    }
    return next;
}

ExtendedContext ExtendedContext::record_note(entry::RefineNote note) const {
    if (!open_) throw TurnClosed("record_note requires an open turn");
    ExtendedContext next = *this;
    next.entries_.push_back({boundaries_.size(), std::move(note)});
    return next;
}

SurfaceContext ExtendedContext::surface_view() const {
    SurfaceContext out;
    for (const auto& e : entries_) {
        if (e.is<entry::UserTurn>()) out.turns.push_back(e.as<entry::UserTurn>().utterance);
        else if (e.is<entry::AgentTurn>()) out.turns.push_back(e.as<entry::AgentTurn>().utterance);
    }
    return out;
}

ExtendedContext ExtendedContext::from_entries(std::vector<ContextEntry> entries) {
    ExtendedContext ctx;
    bool pending_respond = false;
    bool seen_action_this_turn = false;
    bool seen_block_this_turn = false;
    std::vector<bool> is_invocation(entries.size(), false);
    std::vector<bool> has_output(entries.size(), false);

    auto fail = [](std::size_t i, const std::string& what) {
        throw InvalidValue("entry " + std::to_string(i) + ": " + what);
    };

    for (std::size_t i = 0; i < entries.size(); ++i) {
        const ContextEntry& e = entries[i];
        if (pending_respond && !e.is<entry::AgentTurn>()) fail(i, "Respond must be followed by its agent turn");
        if (e.is<entry::UserTurn>()) {
            if (ctx.open_) fail(i, "two consecutive user turns");
            if (e.as<entry::UserTurn>().utterance.speaker() != Speaker::User) fail(i, "user turn spoken by agent");
            if (e.turn != ctx.boundaries_.size() + 1) fail(i, "turn index out of sequence");
            ctx.boundaries_.push_back(i);
            ctx.open_ = true;
            seen_action_this_turn = seen_block_this_turn = false;
            continue;
        }
        if (!ctx.open_) fail(i, std::string(kind_name(e)) + " outside an open turn");
        if (e.turn != ctx.boundaries_.size()) fail(i, "turn index mismatch");

        std::visit(overloaded{
                       [&](const entry::AgentTurn& t) {
                           if (!pending_respond) fail(i, "agent turn without a Respond action");
                           if (t.utterance.speaker() != Speaker::Agent) fail(i, "agent turn spoken by user");
                           const auto& prev = entries[i - 1].as<entry::Action>().action;
                           if (prev.response().text != t.utterance.text()) fail(i, "agent turn text differs from Respond");
                           pending_respond = false;
                           ctx.open_ = false;
                       },
                       [&](const entry::Action& a) {
                           seen_action_this_turn = true;
                           if (a.action.is_respond()) pending_respond = true;
                           else is_invocation[i] = true;
                       },
                       [&](const entry::ToolOutput& o) {
                           std::size_t k = o.for_action_index;
                           if (k >= i || !is_invocation[k]) fail(i, "tool output without a preceding invocation");
                           if (entries[k].turn != e.turn) fail(i, "tool output references another turn");
                           if (has_output[k]) fail(i, "duplicate tool output");
                           has_output[k] = true;
                       },
                       [&](const entry::InceptionBlock&) {
                           if (seen_block_this_turn) fail(i, "more than one inception block in a turn");
                           if (seen_action_this_turn) fail(i, "inception block after a control action");
                           if (i != ctx.boundaries_.back() + 1) fail(i, "inception block must follow the user turn");
                           seen_block_this_turn = true;
                       },
                       [&](const entry::RefineNote&) {},
                       [&](const entry::UserTurn&) {},
                   },
                   e.body);
    }
    if (pending_respond) throw InvalidValue("trailing Respond without agent turn");
    ctx.entries_ = std::move(entries);
    return ctx;
}

// --- serialization -------------------------------------------------------

void to_json(json& j, const Utterance& u) {
    j = json{{"speaker", std::string(to_string(u.speaker()))}, {"text", u.text()}};
}

Utterance utterance_from_json(const json& j) {
    const std::string speaker = j.at("speaker").get<std::string>();
    if (speaker != "user" && speaker != "agent") throw InvalidValue("unknown speaker '" + speaker + "'");
    return {speaker == "user" ? Speaker::User : Speaker::Agent, j.at("text").get<std::string>()};
}

void to_json(json& j, const ControlAction& a) {
    if (a.is_tool()) {
        j = json{{"type", "tool"}, {"name", a.invocation().tool_name}, {"arguments", a.invocation().arguments}};
    } else {
        j = json{{"type", "respond"}, {"text", a.response().text}};
    }
}

ControlAction action_from_json(const json& j) {
    // Annotation files in the wild use {"name", "arguments"} without a type tag.
    std::string type = j.value("type", j.contains("name") ? "tool" : "respond");
    if (type == "tool") return ControlAction::tool(j.at("name").get<std::string>(), j.value("arguments", json::object()));
    if (type == "respond") return ControlAction::respond(j.at("text").get<std::string>());
    throw InvalidValue("unknown action type '" + type + "'");
}

json entry_to_json(const ContextEntry& e) {
    json j{{"turn", e.turn}, {"kind", std::string(kind_name(e))}};
    std::visit(overloaded{
                   [&](const entry::UserTurn& t) { j["text"] = t.utterance.text(); },
                   [&](const entry::AgentTurn& t) { j["text"] = t.utterance.text(); },
                   [&](const entry::Action& a) { j["action"] = a.action; },
                   [&](const entry::ToolOutput& o) {
                       j["for_action_index"] = o.for_action_index;
                       j["payload"] = o.payload;
                   },
                   [&](const entry::InceptionBlock& b) { j["plan_text"] = b.plan_text; },
                   [&](const entry::RefineNote& n) {
                       j["stage"] = n.stage;
                       j["text"] = n.text;
                   },
               },
               e.body);
    return j;
}

ContextEntry entry_from_json(const json& j) {
    const std::size_t turn = j.at("turn").get<std::size_t>();
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "user_turn") return {turn, entry::UserTurn{Utterance::user(j.at("text").get<std::string>())}};
    if (kind == "agent_turn") return {turn, entry::AgentTurn{Utterance::agent(j.at("text").get<std::string>())}};
    if (kind == "action") return {turn, entry::Action{action_from_json(j.at("action"))}};
    if (kind == "tool_output")
        return {turn, entry::ToolOutput{j.at("for_action_index").get<std::size_t>(), j.at("payload")}};
    if (kind == "inception_block") return {turn, entry::InceptionBlock{j.at("plan_text").get<std::string>()}};
    if (kind == "refine_note")
        return {turn, entry::RefineNote{j.at("stage").get<std::string>(), j.at("text").get<std::string>()}};
    throw InvalidValue("unknown entry kind '" + kind + "'");
}

}  // namespace rein
