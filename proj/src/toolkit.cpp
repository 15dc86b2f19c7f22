#include "rein/toolkit.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "rein/error.hpp"

namespace rein {

std::string_view to_string(RecoveryPlanTag tag) {
    return tag == RecoveryPlanTag::InternalReport ? "internal_report" : "human_transfer";
}

RecoveryPlanTag recovery_plan_tag_from_string(std::string_view s) {
    if (s == "internal_report") return RecoveryPlanTag::InternalReport;
    if (s == "human_transfer") return RecoveryPlanTag::HumanTransfer;
    throw InvalidValue("unknown recovery plan '" + std::string(s) + "'");
}

std::string_view to_string(Domain d) { return d == Domain::AirlineMini ? "airline" : "retail"; }

Domain domain_from_string(std::string_view s) {
    if (s == "airline") return Domain::AirlineMini;
    if (s == "retail") return Domain::RetailMini;
    throw InvalidValue("unknown domain '" + std::string(s) + "'");
}

std::string_view to_string(ToolStatus s) {
    switch (s) {
        case ToolStatus::Ok: return "ok";
        case ToolStatus::ValidationError: return "validation_error";
        case ToolStatus::DomainError: return "domain_error";
    }
    return "?";
}

json ToolOutcome::to_json() const {
    return json{{"status", std::string(rein::to_string(status))}, {"payload", payload}, {"message", message}};
}

// --- schema documents ------------------------------------------------------

json tool_schema_json(const ToolSpec& spec) {
    return json{{"type", "function"},
                {"function", {{"name", spec.name}, {"description", spec.description}, {"parameters", spec.parameters}}}};
}

std::string tool_schema_text(const ToolSpec& spec) { return tool_schema_json(spec).dump(2) + "\n"; }

ToolSpec tool_spec_from_schema(const json& doc, bool mutates_state, std::optional<RecoveryPlanTag> tag) {
    const json& fn = doc.contains("function") ? doc.at("function") : doc;
    ToolSpec spec;
    spec.name = fn.at("name").get<std::string>();
    spec.description = fn.value("description", "");
    spec.parameters = fn.value("parameters", spec.parameters);
    spec.mutates_state = mutates_state;
    spec.is_recovery = tag.has_value();
    spec.recovery_plan_tag = tag;
    return spec;
}

// --- validation ----------------------------------------------------------

namespace {

bool type_matches(const std::string& type, const json& v) {
    if (type == "string") return v.is_string();
    if (type == "integer") return v.is_number_integer();
    if (type == "number") return v.is_number();
    if (type == "boolean") return v.is_boolean();
    if (type == "array") return v.is_array();
    if (type == "object") return v.is_object();
    if (type == "null") return v.is_null();
    return false;
}

void validate_node(const json& schema, const json& value, const std::string& path,
                   std::vector<ValidationIssue>& issues) {
    const std::string field = path.empty() ? "<root>" : path;
    if (schema.contains("type")) {
        const std::string type = schema.at("type").get<std::string>();
        if (!type_matches(type, value)) {
            issues.push_back({field, "expected " + type + ", got " + std::string(value.type_name())});
            return;
        }
    }
    if (schema.contains("enum")) {
        const auto& options = schema.at("enum");
        if (std::find(options.begin(), options.end(), value) == options.end())
            issues.push_back({field, "value " + value.dump() + " not in enum " + options.dump()});
    }
    if (value.is_object()) {
        const json props = schema.value("properties", json::object());
        for (const auto& req : schema.value("required", json::array())) {
            const auto name = req.get<std::string>();
            if (!value.contains(name)) issues.push_back({path.empty() ? name : path + "." + name, "missing required field"});
        }
        const bool allow_extra = schema.value("additionalProperties", false);
        for (const auto& [key, v] : value.items()) {
            const std::string child = path.empty() ? key : path + "." + key;
            if (props.contains(key)) validate_node(props.at(key), v, child, issues);
            else if (!allow_extra) issues.push_back({child, "unknown field"});
        }
    }
    if (value.is_array() && schema.contains("items")) {
        for (std::size_t i = 0; i < value.size(); ++i)
            validate_node(schema.at("items"), value[i], field + "[" + std::to_string(i) + "]", issues);
    }
}

}  // namespace

std::string ValidationResult::summary() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < issues.size(); ++i) {
        if (i) os << "; ";
        os << issues[i].field << ": " << issues[i].problem;
    }
    return os.str();
}

ValidationResult validate_json(const json& schema, const json& value) {
    ValidationResult r;
    validate_node(schema, value, "", r.issues);
    return r;
}

ValidationResult validate_args(const ToolSpec& spec, const json& args) {
    return validate_json(spec.parameters, args.is_null() ? json::object() : args);
}

// --- environment ---------------------------------------------------------

Environment::Environment(Domain domain, json tables) : domain_(domain), tables_(std::move(tables)) {
    if (!tables_.is_object()) throw InvalidValue("environment tables must be an object");
}

Environment Environment::load(Domain domain, const std::filesystem::path& db_file) {
    std::ifstream is(db_file);
    if (!is) throw ConfigError("cannot open fixture database " + db_file.string());
    Environment env(domain, json::parse(is));
    env.check_integrity();
    return env;
}

void Environment::append_audit(std::string tool, json arguments) {
    audit_log_.push_back({next_seq(), std::move(tool), std::move(arguments)});
}

void Environment::append_report(json arguments) { report_log_.push_back({next_seq(), std::move(arguments)}); }

void Environment::set_transfer() {
    if (!transfer_flag_) transfer_seq_ = next_seq();
    transfer_flag_ = true;
}

void Environment::check_integrity() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw InvalidValue("referential integrity: " + what);
    };
    const json empty = json::object();
    const json& users = tables_.contains("users") ? tables_.at("users") : empty;
    if (domain_ == Domain::AirlineMini) {
        const json& flights = tables_.contains("flights") ? tables_.at("flights") : empty;
        const json& reservations = tables_.contains("reservations") ? tables_.at("reservations") : empty;
        for (const auto& [id, r] : reservations.items()) {
            require(users.contains(r.at("user_id").get<std::string>()), "reservation " + id + " user");
            for (const auto& f : r.at("flights"))
                require(flights.contains(f.at("flight_number").get<std::string>()), "reservation " + id + " flight");
        }
        for (const auto& [uid, u] : users.items())
            for (const auto& rid : u.value("reservations", json::array()))
                require(reservations.contains(rid.get<std::string>()), "user " + uid + " reservation");
    } else {
        const json& products = tables_.contains("products") ? tables_.at("products") : empty;
        const json& orders = tables_.contains("orders") ? tables_.at("orders") : empty;
        for (const auto& [id, o] : orders.items()) {
            require(users.contains(o.at("user_id").get<std::string>()), "order " + id + " user");
            for (const auto& item : o.at("items")) {
                const auto pid = item.at("product_id").get<std::string>();
                require(products.contains(pid), "order " + id + " product");
                require(products.at(pid).at("variants").contains(item.at("item_id").get<std::string>()),
                        "order " + id + " item");
            }
        }
        for (const auto& [uid, u] : users.items())
            for (const auto& oid : u.value("orders", json::array()))
                require(orders.contains(oid.get<std::string>()), "user " + uid + " order");
    }
}

// --- registry ------------------------------------------------------------

ToolRegistry& ToolRegistry::register_tool(ToolSpec spec, ToolHandler handler) {
    if (find(spec.name)) throw DuplicateName("tool '" + spec.name + "' already registered");
    if (spec.is_recovery != spec.recovery_plan_tag.has_value())
        throw InvalidValue("tool '" + spec.name + "': recovery tools need a plan tag and vice versa");
    if (!handler) throw InvalidValue("tool '" + spec.name + "' has no handler");
    tools_.push_back({std::move(spec), std::move(handler)});
    return *this;
}

const ToolSpec* ToolRegistry::find(std::string_view name) const {
    for (const auto& t : tools_)
        if (t.spec.name == name) return &t.spec;
    return nullptr;
}

std::vector<ToolSpec> ToolRegistry::specs() const {
    std::vector<ToolSpec> out;
    out.reserve(tools_.size());
    for (const auto& t : tools_) out.push_back(t.spec);
    return out;
}

std::vector<const ToolSpec*> ToolRegistry::recovery_tools() const {
    std::vector<const ToolSpec*> out;
    for (const auto& t : tools_)
        if (t.spec.is_recovery) out.push_back(&t.spec);
    return out;
}

ToolRegistry ToolRegistry::without(std::string_view name) const {
    ToolRegistry out;
    for (const auto& t : tools_)
        if (t.spec.name != name) out.tools_.push_back(t);
    return out;
}

const ToolHandler& ToolRegistry::handler(std::string_view name) const {
    for (const auto& t : tools_)
        if (t.spec.name == name) return t.handler;
    throw UnknownTool("unknown tool '" + std::string(name) + "'");
}

InvokeResult invoke_tool(const Environment& env, const ToolRegistry& registry, std::string_view name,
                         const json& args) {
    const ToolSpec* spec = registry.find(name);
    if (!spec) throw UnknownTool("unknown tool '" + std::string(name) + "'");
    const json normalized = args.is_null() ? json::object() : args;
    ValidationResult v = validate_args(*spec, normalized);
    if (!v.ok()) {
        json details = json::array();
        for (const auto& i : v.issues) details.push_back({{"field", i.field}, {"problem", i.problem}});
        return {env, {ToolStatus::ValidationError, details, v.summary()}};
    }
    Environment next = env;
    ToolOutcome outcome;
    try {
        outcome = registry.handler(name)(next, normalized);
    } catch (const json::exception& e) {
        outcome = ToolOutcome::domain_error(std::string("malformed data: ") + e.what());
    }
    if (!outcome.is_ok()) return {env, std::move(outcome)};
    if (spec->mutates_state && !spec->is_recovery) next.append_audit(spec->name, normalized);
    return {std::move(next), std::move(outcome)};
}

Environment apply_ground_truth(const Environment& env, const ToolRegistry& registry,
                               const std::vector<ControlAction>& actions) {
    Environment cur = env;
    for (const auto& a : actions) {
        if (!a.is_tool()) throw GroundTruthFailed("ground truth contains a Respond action");
        const auto& call = a.invocation();
        const ToolSpec* spec = registry.find(call.tool_name);
        if (!spec) throw GroundTruthFailed("ground truth references unknown tool '" + call.tool_name + "'");
        if (!spec->mutates_state || spec->is_recovery)
            throw GroundTruthFailed("ground truth action '" + call.tool_name + "' does not mutate state");
        auto r = invoke_tool(cur, registry, call.tool_name, call.arguments);
        if (!r.outcome.is_ok())
            throw GroundTruthFailed("ground truth action '" + call.tool_name + "' failed: " + r.outcome.message);
        cur = std::move(r.env);
    }
    return cur;
}

std::string state_digest(const Environment& env) {
    const std::string canonical = json{{"domain", std::string(to_string(env.domain()))}, {"tables", env.tables()}}.dump();
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

// --- built-in tools ------------------------------------------------------

ToolSpec transfer_tool_spec() {
    ToolSpec s;
    s.name = std::string(kTransferTool);
    s.description =
        "Transfer the user to a human agent, with a summary of the user's issue. Only transfer if the user "
        "explicitly asks for a human agent, or if the user's issue cannot be resolved by the agent with the "
        "available tools.";
    s.parameters = json{{"type", "object"},
                        {"properties", {{"summary", {{"type", "string"}, {"description", "A summary of the user's issue."}}}}},
                        {"required", {"summary"}}};
    s.mutates_state = false;
    s.is_recovery = true;
    s.recovery_plan_tag = RecoveryPlanTag::HumanTransfer;
    return s;
}

ToolSpec report_tool_spec() {
    ToolSpec s;
    s.name = std::string(kReportTool);
    s.description =
        "Generate an internal error report when the user's request is ambiguous and cannot be confidently "
        "resolved. The report records the ambiguous content, the system's uncertainty, and any actions that "
        "were deferred because of insufficient clarity. Reports are internal and never shown to the user.";
    s.parameters = json{
        {"type", "object"},
        {"properties",
         {{"summary", {{"type", "string"}, {"description", "A short summary of the problematic interaction."}}},
          {"ambiguous_content",
           {{"type", "string"}, {"description", "The part of the user's input that could not be resolved."}}},
          {"system_uncertainty",
           {{"type", "string"}, {"description", "What the agent is uncertain about and why."}}},
          {"deferred_actions",
           {{"type", "array"},
            {"items", {{"type", "string"}}},
            {"description", "Actions postponed until the ambiguity is resolved."}}}}},
        {"required", {"summary", "ambiguous_content", "system_uncertainty"}}};
    s.mutates_state = false;
    s.is_recovery = true;
    s.recovery_plan_tag = RecoveryPlanTag::InternalReport;
    return s;
}

ToolSpec think_tool_spec() {
    ToolSpec s;
    s.name = std::string(kThinkTool);
    s.description =
        "Use the tool to think about something. It will not obtain new information or change the database, "
        "but just append the thought to the log. Use it when complex reasoning is needed.";
    s.parameters = json{{"type", "object"},
                        {"properties", {{"thought", {{"type", "string"}, {"description", "A thought to think about."}}}}},
                        {"required", json::array()}};
    return s;
}

ToolHandler transfer_handler() {
    return [](Environment& env, const json& args) {
        env.set_transfer();
        return ToolOutcome::ok(json{{"transferred", true}, {"summary", args.at("summary")}});
    };
}

ToolHandler report_handler() {
    return [](Environment& env, const json& args) {
        env.append_report(args);
        return ToolOutcome::ok(json{{"report_id", "RPT-" + std::to_string(env.report_log().size())}});
    };
}

ToolHandler think_handler() {
    return [](Environment&, const json&) { return ToolOutcome::ok(); };
}

// --- files ---------------------------------------------------------------

ToolRegistry load_registry(const std::filesystem::path& tools_dir, Domain d) {
    const auto dir = tools_dir / std::string(to_string(d));
    std::ifstream ms(dir / "manifest.json");
    if (!ms) throw ConfigError("missing tool manifest in " + dir.string());
    const json manifest = json::parse(ms);
    auto handlers = domain_handlers(d);
    ToolRegistry reg;
    for (const auto& t : manifest.at("tools")) {
        const std::string name = t.at("name").get<std::string>();
        std::ifstream ss(dir / (name + ".json"));
        if (!ss) throw ConfigError("missing schema document for tool '" + name + "'");
        std::optional<RecoveryPlanTag> tag;
        if (t.contains("recovery_plan") && !t.at("recovery_plan").is_null())
            tag = recovery_plan_tag_from_string(t.at("recovery_plan").get<std::string>());
        ToolSpec spec = tool_spec_from_schema(json::parse(ss), t.value("mutates_state", false), tag);
        if (spec.name != name) throw ConfigError("schema name mismatch for '" + name + "'");
        auto h = handlers.find(name);
        if (h == handlers.end()) throw ConfigError("no implementation for tool '" + name + "'");
        reg.register_tool(std::move(spec), h->second);
    }
    return reg;
}

void save_registry(const std::filesystem::path& tools_dir, Domain d, const ToolRegistry& registry) {
    const auto dir = tools_dir / std::string(to_string(d));
    std::filesystem::create_directories(dir);
    json manifest{{"domain", std::string(to_string(d))}, {"tools", json::array()}};
    for (const auto& spec : registry.specs()) {
        std::ofstream(dir / (spec.name + ".json"), std::ios::binary) << tool_schema_text(spec);
        manifest["tools"].push_back(
            {{"name", spec.name},
             {"mutates_state", spec.mutates_state},
             {"recovery_plan", spec.recovery_plan_tag ? json(std::string(to_string(*spec.recovery_plan_tag))) : json()}});
    }
    std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << "\n";
}

}  // namespace rein
