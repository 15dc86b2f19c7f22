#pragma once
// Tool schemas, the tool registry, and the deterministic fixture environments.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rein/dialogue.hpp"

namespace rein {

enum class RecoveryPlanTag { InternalReport, HumanTransfer };

std::string_view to_string(RecoveryPlanTag tag);
RecoveryPlanTag recovery_plan_tag_from_string(std::string_view s);

inline constexpr std::string_view kReportTool = "generate_internal_error_report";
inline constexpr std::string_view kTransferTool = "transfer_to_human_agents";
inline constexpr std::string_view kThinkTool = "think";

struct ToolSpec {
    std::string name;
    std::string description;
    json parameters = json{{"type", "object"}, {"properties", json::object()}, {"required", json::array()}};
    bool mutates_state = false;
    bool is_recovery = false;
    std::optional<RecoveryPlanTag> recovery_plan_tag;

    bool operator==(const ToolSpec&) const = default;
};

// The schema document: {"type": "function", "function": {name, description, parameters}}.
json tool_schema_json(const ToolSpec& spec);
std::string tool_schema_text(const ToolSpec& spec);
// Traits (mutates_state, recovery tag) are not part of the schema document.
ToolSpec tool_spec_from_schema(const json& doc, bool mutates_state,
                               std::optional<RecoveryPlanTag> recovery_plan_tag);

struct ValidationIssue {
    std::string field;
    std::string problem;
    bool operator==(const ValidationIssue&) const = default;
};

struct ValidationResult {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
    std::string summary() const;
};

// Checks args against the tool's parameter schema: required fields, declared
// types, enums, nested arrays/objects. Undeclared fields are rejected.
ValidationResult validate_args(const ToolSpec& spec, const json& args);
ValidationResult validate_json(const json& schema, const json& value);

enum class Domain { AirlineMini, RetailMini };

std::string_view to_string(Domain d);
Domain domain_from_string(std::string_view s);

struct AuditRecord {
    std::size_t seq;
    std::string tool;
    json arguments;
    bool operator==(const AuditRecord&) const = default;
};

struct ReportRecord {
    std::size_t seq;
    json arguments;
    bool operator==(const ReportRecord&) const = default;
};

// Keyed business tables plus the side channels scored separately from the
// goal state. Tables are JSON objects, so key order never depends on the
// order rows were inserted.
class Environment {
public:
    Environment(Domain domain, json tables);

    static Environment load(Domain domain, const std::filesystem::path& db_file);

    Domain domain() const { return domain_; }
    const json& tables() const { return tables_; }
    json& tables() { return tables_; }

    const std::vector<AuditRecord>& audit_log() const { return audit_log_; }
    const std::vector<ReportRecord>& report_log() const { return report_log_; }
    bool transfer_flag() const { return transfer_flag_; }
    std::optional<std::size_t> transfer_seq() const { return transfer_seq_; }

    std::size_t next_seq() { return seq_++; }
    void append_audit(std::string tool, json arguments);
    void append_report(json arguments);
    void set_transfer();

    // Throws InvalidValue on a dangling reference.
    void check_integrity() const;

    bool operator==(const Environment&) const = default;

private:
    Domain domain_;
    json tables_;
    std::vector<AuditRecord> audit_log_;
    std::vector<ReportRecord> report_log_;
    bool transfer_flag_ = false;
    std::optional<std::size_t> transfer_seq_;
    std::size_t seq_ = 0;
};

enum class ToolStatus { Ok, ValidationError, DomainError };

std::string_view to_string(ToolStatus s);

struct ToolOutcome {
    ToolStatus status = ToolStatus::Ok;
    json payload = json::object();
    std::string message;

    static ToolOutcome ok(json payload = json::object()) { return {ToolStatus::Ok, std::move(payload), ""}; }
    static ToolOutcome domain_error(std::string message) {
        return {ToolStatus::DomainError, json::object(), std::move(message)};
    }
    bool is_ok() const { return status == ToolStatus::Ok; }
    json to_json() const;
};

using ToolHandler = std::function<ToolOutcome(Environment&, const json&)>;

class ToolRegistry {
public:
    // Throws DuplicateName.
    ToolRegistry& register_tool(ToolSpec spec, ToolHandler handler);

    const ToolSpec* find(std::string_view name) const;
    std::vector<ToolSpec> specs() const;
    std::size_t size() const { return tools_.size(); }
    std::vector<const ToolSpec*> recovery_tools() const;

    // Copy of this registry with one tool removed (no-op if absent).
    ToolRegistry without(std::string_view name) const;

    const ToolHandler& handler(std::string_view name) const;

private:
    struct Entry {
        ToolSpec spec;
        ToolHandler handler;
    };
    std::vector<Entry> tools_;
};

struct InvokeResult {
    Environment env;
    ToolOutcome outcome;
};

// Throws UnknownTool. Validation and domain failures come back as outcomes and
// leave the environment untouched.
InvokeResult invoke_tool(const Environment& env, const ToolRegistry& registry, std::string_view name,
                         const json& args);

// Replays annotated mutating actions to obtain the expected end state.
// Throws GroundTruthFailed if any action is non-mutating or does not succeed.
Environment apply_ground_truth(const Environment& env, const ToolRegistry& registry,
                               const std::vector<ControlAction>& actions);

// SHA-256 over the canonical business tables. Excludes the audit, report and
// transfer side channels.
std::string state_digest(const Environment& env);

// Built-in handlers.
ToolSpec transfer_tool_spec();
ToolSpec report_tool_spec();
ToolSpec think_tool_spec();
ToolHandler transfer_handler();
ToolHandler report_handler();
ToolHandler think_handler();
std::map<std::string, ToolHandler> domain_handlers(Domain d);

// Loads tools/<domain>/manifest.json plus one schema document per tool.
ToolRegistry load_registry(const std::filesystem::path& tools_dir, Domain d);
// Writes the schema documents and manifest for a registry.
void save_registry(const std::filesystem::path& tools_dir, Domain d, const ToolRegistry& registry);

}  // namespace rein
