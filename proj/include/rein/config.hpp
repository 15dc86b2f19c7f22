#pragma once
// Run configuration: JSON file with ${VAR} interpolation, overridable by flags.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rein/llm.hpp"

namespace rein {

struct Temperatures {
    double agent = 0.0;
    double inception = 0.0;
    double user = 1.0;
    double generator = 0.7;
    double judge = 0.0;
};

struct RunConfig {
    std::vector<std::string> domains{"airline"};
    std::vector<std::string> modes{"baseline"};
    std::string agent_model;
    std::string inception_model;
    std::string user_model;
    std::string generator_model;
    std::vector<std::string> judge_models;
    Temperatures temperatures;

    std::size_t max_turns = 30;
    int max_steps = 15;
    std::size_t workers = 1;
    std::optional<long long> budget_tokens;
    std::optional<long long> budget_calls;
    std::uint64_t seed = 0;
    std::size_t targeted_turn = 2;
    bool include_unseen = false;  // show unseen definitions to the inception module
    int retry_attempts = 4;
    long long retry_base_ms = 500;
    std::string phrase = "Sorry for the inconvenience";
    bool phrase_substring = false;

    std::filesystem::path data_dir;  // defaults to the shipped data directory
    std::filesystem::path prompts_dir, tools_dir, db_dir, scenarios_dir, raw_dir;
    std::filesystem::path runs_dir = "runs";
    std::string run_id = "run";
    std::filesystem::path curate_out = "curated";
    std::optional<std::filesystem::path> mock_script;
    std::optional<std::filesystem::path> review_file;

    std::vector<std::string> scenario_ids;  // empty: every scenario
    std::vector<std::string> error_types;   // curation grid; empty: all six
    std::optional<std::size_t> max_episodes;  // stop after this many new episodes

    // Fills unset directories from data_dir.
    void resolve_paths();
    std::filesystem::path run_dir() const { return runs_dir / run_id; }
};

// Replaces ${NAME} in every string value. Throws ConfigError for unset names.
json interpolate_env(const json& doc);

// Relative paths in the file resolve against the file's directory.
RunConfig config_from_json(const json& doc, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& file);

// Total validation before any model call; throws ConfigError.
void validate_run_config(const RunConfig& cfg);
void validate_curate_config(const RunConfig& cfg);

// True when the model id needs the scripted mock.
bool is_mock_model(const std::string& id);

}  // namespace rein
