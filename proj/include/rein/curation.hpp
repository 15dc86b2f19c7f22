#pragma once
// Raw session filtering, error-seeded context generation, QA and splitting.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rein/inception.hpp"
#include "rein/llm.hpp"
#include "rein/simulation.hpp"
#include "rein/toolkit.hpp"

namespace rein {

struct RawSession {
    std::string id;
    Domain domain = Domain::AirlineMini;
    json user_profile = json::object();
    std::string goal;
    std::vector<ControlAction> annotations;
    bool outputs_key_present = false;
    bool requires_transfer = false;
};

// "outputs" counts as present only when it holds values; an explicit
// requires_transfer or a transfer annotation marks the session as needing one.
RawSession raw_session_from_json(const json& j);
std::vector<RawSession> load_raw_sessions(const std::filesystem::path& dir);

using MutatingLookup = std::function<bool(Domain, const std::string&)>;
MutatingLookup mutating_lookup(const std::map<Domain, ToolRegistry>& registries);

enum class FilterReason { NoMutatingAnnotation, OutputsKey, RequiresTransfer };
std::string_view to_string(FilterReason r);

std::optional<FilterReason> filter_reason(const RawSession& s, const MutatingLookup& is_mutating);
std::vector<RawSession> filter_sessions(const std::vector<RawSession>& raw, const MutatingLookup& is_mutating);

using TokenCounter = std::function<long long(std::string_view)>;

struct ContextCandidate {
    std::string id;  // "<session>-<error key>"
    std::string session_id;
    Domain domain = Domain::AirlineMini;
    ErrorId error_type = ErrorId::Anaphora;
    std::vector<Utterance> triple;
    long long token_count = 0;
    std::vector<bool> judge_votes;
    std::optional<bool> author_approved;
};

long long candidate_tokens(const std::vector<Utterance>& turns, const TokenCounter& counter);

struct GenerationSetup {
    std::string prompt_template;
    json demonstrations = json::object();  // demons.json
    std::vector<ErrorType> errors;         // every type, seen or not
    std::string model_id;
    double temperature = 0.7;
    int max_output_tokens = 1024;
    int max_attempts = 3;
    TokenCounter counter = whitespace_tokens;
};

GenerationSetup load_generation_setup(const std::filesystem::path& prompts_dir);

// Schema the generator must satisfy.
json context_schema();

// Throws GenerationSchemaViolation after max_attempts bad outputs.
ContextCandidate generate_context(ChatClient& client, const RawSession& session, ErrorId error_type,
                                  const std::vector<ToolSpec>& tools, const GenerationSetup& setup);

enum class QaReason { TurnCount, TokenBudget, JudgeRejected, JudgeUnavailable, AuthorRejected };
std::string_view to_string(QaReason r);

struct QaResult {
    bool accepted = false;
    std::optional<QaReason> reason;
    ContextCandidate candidate;
};

struct JudgeSetup {
    std::string prompt_template;
    std::vector<ErrorType> errors;
    std::vector<std::string> model_ids;  // parallel to the judge clients
    double temperature = 0.0;
    int max_output_tokens = 256;
    long long token_limit = 170;
    TokenCounter counter = whitespace_tokens;
    std::optional<std::map<std::string, bool>> approvals;  // review file, when configured
};

JudgeSetup load_judge_setup(const std::filesystem::path& prompts_dir);

// Parses one judge reply; anything unrecognised counts as a rejection.
bool parse_judge_vote(const std::string& text);

QaResult qa_filter(const ContextCandidate& candidate, const std::vector<ChatClient*>& judges, const JudgeSetup& setup);

// Newline-delimited "id<TAB>approve" lines; approve accepts 1/0, true/false, yes/no.
std::map<std::string, bool> load_review_file(const std::filesystem::path& file);

struct SplitStatsRow {
    std::string domain;
    std::size_t sessions = 0;
    std::size_t seen = 0;
    std::size_t unseen = 0;
    std::size_t total() const { return seen + unseen; }
};

struct DatasetSplit {
    std::vector<ContextCandidate> seen;
    std::vector<ContextCandidate> unseen;
    std::vector<SplitStatsRow> stats;  // one row per domain, then "total"
    std::size_t near_token_bound = 0;  // accepted contexts within the margin of the bound
};

DatasetSplit split_dataset(const std::vector<ContextCandidate>& accepted, long long token_limit = 170,
                           long long margin = 10);

std::string split_stats_text(const DatasetSplit& split);
std::string split_stats_csv(const DatasetSplit& split);

// Ground truth keeps only the state-mutating annotations.
Scenario candidate_to_scenario(const ContextCandidate& c, const RawSession& session, const MutatingLookup& is_mutating);

}  // namespace rein
