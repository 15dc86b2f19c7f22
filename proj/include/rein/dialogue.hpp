#pragma once
// Dialogue turns, surface/extended contexts, and control actions.
//
// An ExtendedContext is the agent-side history: user and agent utterances plus
// every tool invocation, tool output and injected inception block. The user
// only ever sees its surface projection. Contexts are immutable values; every
// mutating operation returns a new context and leaves the receiver untouched.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace rein {

using json = nlohmann::json;

enum class Speaker { User, Agent };

std::string_view to_string(Speaker s);

class Utterance {
public:
    // Throws InvalidValue when text is blank.
    Utterance(Speaker speaker, std::string text);

    static Utterance user(std::string text) { return {Speaker::User, std::move(text)}; }
    static Utterance agent(std::string text) { return {Speaker::Agent, std::move(text)}; }

    Speaker speaker() const { return speaker_; }
    const std::string& text() const { return text_; }

    bool operator==(const Utterance&) const = default;

private:
    Speaker speaker_;
    std::string text_;
};

struct SurfaceContext {
    std::vector<Utterance> turns;

    bool empty() const { return turns.empty(); }
    std::size_t size() const { return turns.size(); }
    bool operator==(const SurfaceContext&) const = default;
};

struct ToolInvocation {
    std::string tool_name;
    json arguments = json::object();
    bool operator==(const ToolInvocation&) const = default;
};

struct Respond {
    std::string text;
    bool operator==(const Respond&) const = default;
};

struct ControlAction {
    std::variant<ToolInvocation, Respond> kind;

    static ControlAction tool(std::string name, json arguments = json::object()) {
        return {ToolInvocation{std::move(name), std::move(arguments)}};
    }
    static ControlAction respond(std::string text) { return {Respond{std::move(text)}}; }

    bool is_tool() const { return std::holds_alternative<ToolInvocation>(kind); }
    bool is_respond() const { return std::holds_alternative<Respond>(kind); }
    const ToolInvocation& invocation() const { return std::get<ToolInvocation>(kind); }
    const Respond& response() const { return std::get<Respond>(kind); }

    bool operator==(const ControlAction&) const = default;
};

namespace entry {

struct UserTurn {
    Utterance utterance;
    bool operator==(const UserTurn&) const = default;
};
struct AgentTurn {
    Utterance utterance;
    bool operator==(const AgentTurn&) const = default;
};
struct Action {
    ControlAction action;
    bool operator==(const Action&) const = default;
};
struct ToolOutput {
    std::size_t for_action_index;
    json payload;
    bool operator==(const ToolOutput&) const = default;
};
// Externally injected recovery reasoning. Never sampled from the task agent.
struct InceptionBlock {
    std::string plan_text;
    bool operator==(const InceptionBlock&) const = default;
};
// Internal self-refinement artifacts (draft response, feedback).
struct RefineNote {
    std::string stage;
    std::string text;
    bool operator==(const RefineNote&) const = default;
};

}  // namespace entry

using InceptionBlock = entry::InceptionBlock;

struct ContextEntry {
    using Body = std::variant<entry::UserTurn, entry::AgentTurn, entry::Action, entry::ToolOutput,
                              entry::InceptionBlock, entry::RefineNote>;
    std::size_t turn;  // 1-based dialogue turn this entry belongs to
    Body body;

    template <class T>
    bool is() const { return std::holds_alternative<T>(body); }
    template <class T>
    const T& as() const { return std::get<T>(body); }

    bool operator==(const ContextEntry&) const = default;
};

std::string_view kind_name(const ContextEntry& e);

class ExtendedContext {
public:
    ExtendedContext() = default;

    // Rebuilds a context from raw entries, checking every structural invariant.
    // Throws InvalidValue describing the first violation.
    static ExtendedContext from_entries(std::vector<ContextEntry> entries);

    const std::vector<ContextEntry>& entries() const { return entries_; }
    // Index of the first entry of each turn; turn_boundaries()[t-1] starts turn t.
    const std::vector<std::size_t>& turn_boundaries() const { return boundaries_; }

    std::size_t turn_count() const { return boundaries_.size(); }
    // True when the last surface entry is a user utterance awaiting a response.
    bool turn_open() const { return open_; }
    bool empty() const { return entries_.empty(); }

    // Entries belonging to turn t (1-based), as [first, last) indices.
    std::pair<std::size_t, std::size_t> turn_range(std::size_t turn) const;

    [[nodiscard]] ExtendedContext append_user_turn(const Utterance& u) const;
    [[nodiscard]] ExtendedContext inject_inception(const std::optional<InceptionBlock>& block) const;
    [[nodiscard]] ExtendedContext record_action(const ControlAction& a,
                                                const std::optional<json>& output = std::nullopt) const;
    [[nodiscard]] ExtendedContext record_note(entry::RefineNote note) const;

    SurfaceContext surface_view() const;

    bool has_inception_in_current_turn() const;
    bool has_action_in_current_turn() const;

    bool operator==(const ExtendedContext&) const = default;

private:
    std::vector<ContextEntry> entries_;
    std::vector<std::size_t> boundaries_;
    bool open_ = false;
};

inline SurfaceContext surface_view(const ExtendedContext& ctx) { return ctx.surface_view(); }

// Structured (de)serialization shared by transcripts and scenario files.
void to_json(json& j, const Utterance& u);
Utterance utterance_from_json(const json& j);
void to_json(json& j, const ControlAction& a);
ControlAction action_from_json(const json& j);
json entry_to_json(const ContextEntry& e);
ContextEntry entry_from_json(const json& j);

}  // namespace rein
