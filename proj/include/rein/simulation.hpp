#pragma once
// Scenarios, user simulation, episode orchestration and scoring.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rein/agent.hpp"
#include "rein/dialogue.hpp"
#include "rein/inception.hpp"
#include "rein/llm.hpp"
#include "rein/toolkit.hpp"
#include "rein/transcript.hpp"

namespace rein {

struct Scenario {
    std::string id;
    Domain domain = Domain::AirlineMini;
    std::string session_id;
    json user_profile = json::object();
    std::string user_goal;
    std::vector<ControlAction> ground_truth_actions;
    ErrorId error_type = ErrorId::Anaphora;
    bool seen = true;
    std::vector<Utterance> initial_context;  // u1, a1, u2

    Situation situation() const { return situation_of(error_type); }
};

// Throws InvalidValue when the scenario breaks its invariants.
void validate_scenario(const Scenario& s);
json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const json& j);
Scenario load_scenario(const std::filesystem::path& file);
void save_scenario(const std::filesystem::path& file, const Scenario& s);
// Every *.json below dir, recursively, ordered by scenario id.
std::vector<Scenario> load_scenarios(const std::filesystem::path& dir);

// Context after the seeded triple: turn 1 closed, turn 2 open.
ExtendedContext seed_context(const Scenario& s);

enum class Reason {
    GoalStateMatch,
    GoalStateMismatch,
    ReportFiled,
    ReportMissing,
    TransferDone,
    TransferMissing,
    WrongPlanUsed,
    PostTransferMutation,
    PhrasePresent,
    PhraseMissing,
    MaxStepsExceeded,
    EpisodeAborted,
};

std::string_view to_string(Reason r);
Reason reason_from_string(std::string_view s);

struct ScoreVerdict {
    bool pass = false;
    std::vector<Reason> reasons;
    bool has(Reason r) const;
    bool operator==(const ScoreVerdict&) const = default;
};

struct Activation {
    std::size_t turn;
    InceptionVerdict verdict;
    bool operator==(const Activation&) const = default;
};

struct EpisodeRecord {
    std::string scenario_id;
    std::string mode;
    ExtendedContext transcript;
    std::vector<Activation> activations;
    std::string final_digest;
    std::string expected_digest;
    std::size_t report_count = 0;
    bool transfer_flag = false;
    std::optional<std::size_t> transfer_seq;
    std::vector<AuditRecord> audit_log;
    std::set<std::string> flags;  // max_steps_exceeded, gateway_failed, parse_fallback, ...
    std::optional<ScoreVerdict> verdict;
    std::uint64_t seed = 0;

    // Scenario metadata carried for reporting.
    Domain domain = Domain::AirlineMini;
    ErrorId error_type = ErrorId::Anaphora;
    bool seen = true;

    bool operator==(const EpisodeRecord&) const = default;
};

Transcript episode_to_transcript(const EpisodeRecord& r);
EpisodeRecord episode_from_transcript(const Transcript& t);
void save_episode(const std::filesystem::path& file, const EpisodeRecord& r);
EpisodeRecord load_episode(const std::filesystem::path& file);

// Flags that fail an episode regardless of outcome.
bool is_hard_flag(const std::string& flag);

struct ScoringRules {
    std::string phrase = "Sorry for the inconvenience";
    bool phrase_substring = false;  // prefix match when false
};

// The agent's first surfaced reply after the first injected block.
std::optional<std::string> first_post_injection_response(const ExtendedContext& ctx);

// Pure function of the record and scenario.
ScoreVerdict score_episode(const EpisodeRecord& record, const Scenario& scenario, const ScoringRules& rules = {});

struct UserSimConfig {
    std::string system_template;  // {{instruction}} {{profile}}
    std::string model_id;
    double temperature = 1.0;
    int max_output_tokens = 512;
    std::string stop_token = "###STOP###";
    std::string opening = "Hi! How can I help you today?";
};

// nullopt is the stop signal.
std::optional<Utterance> simulate_user(ChatClient& client, const UserSimConfig& cfg, const json& profile,
                                       const std::string& goal, const SurfaceContext& surface);

struct EpisodeClients {
    ChatClient* agent = nullptr;
    ChatClient* inception = nullptr;
    ChatClient* user = nullptr;
};

struct EpisodeSetup {
    const ToolRegistry* registry = nullptr;  // full domain registry
    const Environment* initial_env = nullptr;
    AgentConfig agent;
    const InceptionSetup* inception = nullptr;  // required for inception modes
    UserSimConfig user;
    std::size_t max_turns = 30;
    ScoringRules scoring;
    std::uint64_t seed = 0;
};

EpisodeRecord run_episode(const Scenario& scenario, const RunMode& mode, const EpisodeClients& clients,
                          const EpisodeSetup& setup);

}  // namespace rein
