#pragma once
// Per-turn decision loop of the task agent, with intervention modes.

#include <optional>
#include <string>
#include <vector>

#include "rein/dialogue.hpp"
#include "rein/inception.hpp"
#include "rein/llm.hpp"
#include "rein/toolkit.hpp"

namespace rein {

enum class ModeKind { Baseline, TargetedReIn, DynamicReIn, NaivePromptInstruction, SelfRefine, PhraseVariantReIn };

struct RunMode {
    ModeKind kind = ModeKind::Baseline;
    std::size_t turn_index = 2;  // targeted turn for TargetedReIn and SelfRefine

    // Short tag used in file names and config: baseline, targeted, dynamic,
    // npi, self_refine, phrase_variant.
    std::string tag() const;
    static RunMode parse(std::string_view tag);

    bool uses_inception() const;
    bool inception_due(std::size_t turn) const;
    bool operator==(const RunMode&) const = default;
};

struct AgentConfig {
    std::string base_system_prompt;
    std::string npi_block;
    std::string sr_feedback_template;  // {{draft}} {{context}}
    std::string sr_revision_template;  // {{draft}} {{feedback}} {{context}}
    std::string no_issues_marker = "NO_ISSUES";
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    int max_steps = 15;
    std::string max_steps_message = "I'm sorry, I was unable to complete that request. Is there anything else I can help with?";
};

// Identity for every mode except NaivePromptInstruction.
std::string effective_system_prompt(const RunMode& mode, const AgentConfig& cfg);

struct Step {
    ControlAction action;
    std::optional<ToolOutcome> outcome;
};

struct TurnResult {
    Utterance response;
    std::vector<Step> steps;
    bool inception_fired = false;
    std::optional<InceptionVerdict> verdict;  // set whenever inception ran
    int step_count = 0;                       // policy completions issued
    bool max_steps_exceeded = false;
};

struct TurnOutput {
    TurnResult result;
    ExtendedContext ctx;
    Environment env;
};

struct InceptionHook {
    ChatClient* client = nullptr;
    const InceptionSetup* setup = nullptr;
};

// Runs turn `turn_index` (the currently open turn of ctx).
TurnOutput run_turn(ChatClient& policy, const ExtendedContext& ctx, const Environment& env,
                    const ToolRegistry& registry, const RunMode& mode, std::size_t turn_index, const AgentConfig& cfg,
                    InceptionHook inception = {});

// Draft via the ordinary loop, one feedback call, at most one revision call.
TurnOutput self_refine_turn(ChatClient& policy, const ExtendedContext& ctx, const Environment& env,
                            const ToolRegistry& registry, const AgentConfig& cfg);

}  // namespace rein
