#include "rein/config.hpp"

#include <cstdlib>
#include <regex>

#include "rein/agent.hpp"
#include "rein/error.hpp"
#include "rein/providers.hpp"
#include "rein/text.hpp"
#include "rein/toolkit.hpp"

namespace rein {

#ifndef REIN_DEFAULT_DATA_DIR
#define REIN_DEFAULT_DATA_DIR "data"
#endif

void RunConfig::resolve_paths() {
    if (data_dir.empty()) data_dir = REIN_DEFAULT_DATA_DIR;
    if (prompts_dir.empty()) prompts_dir = data_dir / "prompts";
    if (tools_dir.empty()) tools_dir = data_dir / "tools";
    if (db_dir.empty()) db_dir = data_dir / "db";
    if (scenarios_dir.empty()) scenarios_dir = data_dir / "scenarios";
    if (raw_dir.empty()) raw_dir = data_dir / "raw";
}

json interpolate_env(const json& doc) {
    if (doc.is_string()) {
        static const std::regex var(R"(\$\{([A-Za-z_][A-Za-z0-9_]*)\})");
        const std::string s = doc.get<std::string>();
        std::string out;
        auto begin = std::sregex_iterator(s.begin(), s.end(), var);
        std::size_t last = 0;
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            const auto& m = *it;
            out.append(s, last, static_cast<std::size_t>(m.position()) - last);
            const char* v = std::getenv(m[1].str().c_str());
            if (!v) throw ConfigError("environment variable " + m[1].str() + " is not set");
            out.append(v);
            last = static_cast<std::size_t>(m.position() + m.length());
        }
        out.append(s, last);
        return out;
    }
    if (doc.is_array()) {
        json out = json::array();
        for (const auto& v : doc) out.push_back(interpolate_env(v));
        return out;
    }
    if (doc.is_object()) {
        json out = json::object();
        for (auto it = doc.begin(); it != doc.end(); ++it) out[it.key()] = interpolate_env(it.value());
        return out;
    }
    return doc;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

template <class T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j[key].is_null()) out = j[key].get<T>();
}

}  // namespace

RunConfig config_from_json(const json& raw, const std::filesystem::path& base_dir) {
    static const std::set<std::string> known = {
        "domains", "modes", "agent_model", "inception_model", "user_model", "generator_model", "judge_models",
        "temperatures", "max_turns", "max_steps", "workers", "budget_tokens", "budget_calls", "seed", "targeted_turn",
        "include_unseen", "retry", "phrase", "phrase_match", "paths", "run_id", "mock_script", "review_file",
        "scenarios", "error_types", "max_episodes"};
    if (!raw.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = raw.begin(); it != raw.end(); ++it)
        if (!known.count(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");

    json j = interpolate_env(raw);
    RunConfig c;
    try {
        take(j, "domains", c.domains);
        take(j, "modes", c.modes);
        take(j, "agent_model", c.agent_model);
        take(j, "inception_model", c.inception_model);
        take(j, "user_model", c.user_model);
        take(j, "generator_model", c.generator_model);
        take(j, "judge_models", c.judge_models);
        if (j.contains("temperatures")) {
            const json& t = j["temperatures"];
            take(t, "agent", c.temperatures.agent);
            take(t, "inception", c.temperatures.inception);
            take(t, "user", c.temperatures.user);
            take(t, "generator", c.temperatures.generator);
            take(t, "judge", c.temperatures.judge);
        }
        take(j, "max_turns", c.max_turns);
        take(j, "max_steps", c.max_steps);
        take(j, "workers", c.workers);
        if (j.contains("budget_tokens") && !j["budget_tokens"].is_null()) c.budget_tokens = j["budget_tokens"].get<long long>();
        if (j.contains("budget_calls") && !j["budget_calls"].is_null()) c.budget_calls = j["budget_calls"].get<long long>();
        take(j, "seed", c.seed);
        take(j, "targeted_turn", c.targeted_turn);
        take(j, "include_unseen", c.include_unseen);
        if (j.contains("retry")) {
            take(j["retry"], "max_attempts", c.retry_attempts);
            take(j["retry"], "base_delay_ms", c.retry_base_ms);
        }
        take(j, "phrase", c.phrase);
        if (j.contains("phrase_match")) {
            std::string m = j["phrase_match"].get<std::string>();
            if (m != "prefix" && m != "substring") throw ConfigError("phrase_match must be prefix or substring");
            c.phrase_substring = m == "substring";
        }
        if (j.contains("paths")) {
            const json& p = j["paths"];
            auto path_of = [&](const char* key, std::filesystem::path& out) {
                if (p.contains(key)) out = resolve(base_dir, p[key].get<std::string>());
            };
            path_of("data", c.data_dir);
            path_of("prompts", c.prompts_dir);
            path_of("tools", c.tools_dir);
            path_of("db", c.db_dir);
            path_of("scenarios", c.scenarios_dir);
            path_of("raw", c.raw_dir);
            path_of("runs", c.runs_dir);
            path_of("curate_out", c.curate_out);
        }
        take(j, "run_id", c.run_id);
        if (j.contains("mock_script")) c.mock_script = resolve(base_dir, j["mock_script"].get<std::string>());
        if (j.contains("review_file")) c.review_file = resolve(base_dir, j["review_file"].get<std::string>());
        take(j, "scenarios", c.scenario_ids);
        take(j, "error_types", c.error_types);
        if (j.contains("max_episodes") && !j["max_episodes"].is_null()) c.max_episodes = j["max_episodes"].get<std::size_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    json j;
    try {
        j = json::parse(read_text_file(file));
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    return config_from_json(j, file.parent_path());
}

bool is_mock_model(const std::string& id) { return id == "mock"; }

namespace {

void require_dir(const std::filesystem::path& p, const char* what) {
    if (!std::filesystem::is_directory(p)) throw ConfigError(std::string(what) + " directory not found: " + p.string());
}

void require_file(const std::filesystem::path& p, const char* what) {
    if (!std::filesystem::is_regular_file(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
}

void check_model(const RunConfig& c, const std::string& id, const char* role) {
    if (id.empty()) throw ConfigError(std::string(role) + " model is required");
    if (is_mock_model(id)) {
        if (!c.mock_script) throw ConfigError(std::string(role) + " model is 'mock' but no --mock-script was given");
        return;
    }
    ModelRef ref = parse_model_ref(id);
    ProviderConfig pc = provider_from_env(provider_kind_from_string(ref.provider));
    if (pc.api_key.empty()) throw ConfigError("no credentials for provider '" + ref.provider + "' (" + role + " model)");
}

void check_common(const RunConfig& c) {
    if (c.domains.empty()) throw ConfigError("no domains configured");
    for (const auto& d : c.domains) domain_from_string(d);
    if (!(c.temperatures.agent >= 0 && c.temperatures.agent <= 1 && c.temperatures.inception >= 0 &&
          c.temperatures.inception <= 1 && c.temperatures.user >= 0 && c.temperatures.user <= 1 &&
          c.temperatures.generator >= 0 && c.temperatures.generator <= 1 && c.temperatures.judge >= 0 &&
          c.temperatures.judge <= 1))
        throw ConfigError("temperatures must lie in [0, 1]");
    if (c.workers == 0) throw ConfigError("workers must be at least 1");
    if (c.retry_attempts < 1) throw ConfigError("retry.max_attempts must be at least 1");
    if (c.budget_tokens && *c.budget_tokens <= 0) throw ConfigError("budget_tokens must be positive");
    if (c.budget_calls && *c.budget_calls <= 0) throw ConfigError("budget_calls must be positive");
    require_dir(c.prompts_dir, "prompts");
    require_dir(c.tools_dir, "tools");
    if (c.mock_script) require_file(*c.mock_script, "mock script");
}

}  // namespace

void validate_run_config(const RunConfig& c) {
    check_common(c);
    if (c.modes.empty()) throw ConfigError("no modes configured");
    bool needs_inception = false;
    for (const auto& m : c.modes) needs_inception = needs_inception || RunMode::parse(m).uses_inception();
    if (c.max_turns < c.targeted_turn) throw ConfigError("max_turns is below the targeted turn");
    if (c.max_steps < 1) throw ConfigError("max_steps must be at least 1");
    if (c.run_id.empty() || c.run_id.find('/') != std::string::npos) throw ConfigError("bad run id '" + c.run_id + "'");
    require_dir(c.db_dir, "database");
    require_dir(c.scenarios_dir, "scenarios");
    check_model(c, c.agent_model, "agent");
    check_model(c, c.user_model, "user");
    if (needs_inception) check_model(c, c.inception_model, "inception");
    for (const char* f : {"errors.json", "plans.json", "usersim.md", "npi.md", "sr_feedback.md", "sr_revision.md"})
        require_file(c.prompts_dir / f, "prompt file");
    for (const auto& d : c.domains) {
        require_file(c.prompts_dir / ("system_" + d + ".md"), "system prompt");
        require_file(c.db_dir / (d + ".json"), "database file");
        require_dir(c.tools_dir / d, "tool schema");
    }
}

void validate_curate_config(const RunConfig& c) {
    check_common(c);
    require_dir(c.raw_dir, "raw session");
    check_model(c, c.generator_model, "generator");
    if (c.judge_models.empty()) throw ConfigError("at least one judge model is required");
    for (const auto& m : c.judge_models) check_model(c, m, "judge");
    for (const auto& e : c.error_types)
        if (!try_error_id(e)) throw ConfigError("unknown error type '" + e + "'");
    if (c.review_file) require_file(*c.review_file, "review file");
    for (const char* f : {"errors.json", "context_synthesis.md", "demons.json", "context_filtering.md"})
        require_file(c.prompts_dir / f, "prompt file");
}

}  // namespace rein
