#pragma once
// Error taxonomy, plan mapping and the inception module.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rein/dialogue.hpp"
#include "rein/llm.hpp"
#include "rein/toolkit.hpp"

namespace rein {

enum class ErrorId { Anaphora, MultipleInterpretation, Contradiction, UnsupportedAction, UnsupportedParameter, UnsupportedDomain };
enum class Situation { Ambiguous, Unsupported };

inline constexpr ErrorId kAllErrorIds[] = {ErrorId::Anaphora,          ErrorId::MultipleInterpretation,
                                           ErrorId::Contradiction,     ErrorId::UnsupportedAction,
                                           ErrorId::UnsupportedParameter, ErrorId::UnsupportedDomain};

// Stable snake_case key ("anaphora", "unsupported_domain", ...).
std::string_view error_key(ErrorId id);
// Accepts the key or the display name, case-insensitively. Throws InvalidValue.
ErrorId error_id_from_string(std::string_view s);
std::optional<ErrorId> try_error_id(std::string_view s);

std::string_view to_string(Situation s);
Situation situation_from_string(std::string_view s);
Situation situation_of(ErrorId id);
bool seen_by_default(ErrorId id);

struct ErrorType {
    ErrorId id;
    std::string name;  // display name, e.g. "Multiple Interpretation"
    Situation situation;
    bool seen;
    std::string description;
};

// Built-in taxonomy with the reference descriptions.
const std::vector<ErrorType>& builtin_error_types();
const ErrorType& builtin_error_type(ErrorId id);

RecoveryPlanTag plan_for(ErrorId id);
inline RecoveryPlanTag plan_for(const ErrorType& e) { return plan_for(e.id); }

struct PlanDefinition {
    Situation situation;
    RecoveryPlanTag tag;
    std::string name;
    std::string description;
};

struct RecoveryPlan {
    RecoveryPlanTag tag;
    std::string instantiated_text;
    bool operator==(const RecoveryPlan&) const = default;
};

enum class Decision { No, Yes };

struct InceptionVerdict {
    Decision decision = Decision::No;
    std::optional<RecoveryPlan> plan;
    std::optional<ErrorId> detected_error;
    std::string raw_text;
    // parse_fallback, plan_tag_inferred, gateway_failed
    std::set<std::string> flags;

    bool yes() const { return decision == Decision::Yes; }
    bool operator==(const InceptionVerdict&) const = default;
};

json verdict_to_json(const InceptionVerdict& v);
InceptionVerdict verdict_from_json(const json& j);

// Validate against the shapes and reject inconsistent taxonomy entries.
std::vector<ErrorType> load_error_definitions(const std::filesystem::path& file);
std::vector<PlanDefinition> load_plan_definitions(const std::filesystem::path& file);

struct InceptionSetup {
    std::string prompt_template;        // placeholders {{context}} {{tools}} {{errors}} {{plans}}
    std::vector<ErrorType> errors;      // the definitions F is shown
    std::vector<PlanDefinition> plans;
    std::string model_id;
    double temperature = 0.0;
    int max_output_tokens = 1024;
};

// prompts_dir holds inception.md, errors.json, plans.json and plans_phrase.json.
// Unseen types are dropped unless include_unseen; phrase_plans swaps in the
// apology-phrase plan definitions.
InceptionSetup load_inception_setup(const std::filesystem::path& prompts_dir, bool include_unseen = false,
                                    bool phrase_plans = false);

std::string render_error_definitions(const std::vector<ErrorType>& errors);
std::string render_plan_definitions(const std::vector<PlanDefinition>& plans);
std::string render_tool_list(const std::vector<ToolSpec>& tools);

// surface is C_t (without u_t).
ChatRequest build_inception_prompt(const SurfaceContext& surface, const Utterance& u_t,
                                   const std::vector<ToolSpec>& tools, const InceptionSetup& setup);

// Total: malformed output maps to No with the parse_fallback flag.
InceptionVerdict parse_verdict(const std::string& raw);

struct InceptionResult {
    InceptionVerdict verdict;
    std::optional<InceptionBlock> block;
};

// ctx must have an open turn; its last user utterance is u_t.
InceptionResult run_inception(ChatClient& client, const ExtendedContext& ctx, const std::vector<ToolSpec>& tools,
                              const InceptionSetup& setup);

}  // namespace rein
