#pragma once
// Shared helpers for unit and acceptance tests: shipped data, temp dirs, and
// a recorded replay of the mock episode scripts.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rein/agent.hpp"
#include "rein/commands.hpp"
#include "rein/config.hpp"
#include "rein/inception.hpp"
#include "rein/llm.hpp"
#include "rein/simulation.hpp"
#include "rein/text.hpp"
#include "rein/toolkit.hpp"

namespace fixtures {

inline std::filesystem::path data_dir() { return REIN_DEFAULT_DATA_DIR; }
inline std::filesystem::path prompts_dir() { return data_dir() / "prompts"; }
inline std::filesystem::path mock_episodes() { return data_dir() / "mock" / "episodes.json"; }

class TempDir {
public:
    explicit TempDir(const std::string& tag = "rein") {
        static std::atomic<unsigned> counter{0};
        auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline rein::Scenario scenario(const std::string& id) {
    for (auto& s : rein::load_scenarios(data_dir() / "scenarios"))
        if (s.id == id) return s;
    throw std::runtime_error("no fixture scenario " + id);
}

struct DomainData {
    rein::ToolRegistry registry;
    rein::Environment env;
    std::string system_prompt;
};

inline DomainData domain(rein::Domain d) {
    std::string name(rein::to_string(d));
    return {rein::load_registry(data_dir() / "tools", d),
            rein::Environment::load(d, data_dir() / "db" / (name + ".json")),
            rein::read_text_file(prompts_dir() / ("system_" + name + ".md"))};
}

inline rein::AgentConfig agent_config(const std::string& system_prompt) {
    rein::AgentConfig a;
    a.base_system_prompt = system_prompt;
    a.npi_block = rein::read_text_file(prompts_dir() / "npi.md");
    a.sr_feedback_template = rein::read_text_file(prompts_dir() / "sr_feedback.md");
    a.sr_revision_template = rein::read_text_file(prompts_dir() / "sr_revision.md");
    a.model_id = "mock";
    return a;
}

inline rein::UserSimConfig user_config() {
    rein::UserSimConfig u;
    u.system_template = rein::read_text_file(prompts_dir() / "usersim.md");
    u.model_id = "mock";
    return u;
}

// One episode of the shipped mock script with every request recorded.
struct RecordedEpisode {
    rein::EpisodeRecord record;
    std::vector<rein::ChatRequest> agent_requests;
    std::vector<rein::ChatRequest> inception_requests;
    std::vector<rein::ChatRequest> user_requests;
};

class MockReplay {
public:
    explicit MockReplay(bool include_unseen = false)
        : script_(rein::MockScript::load(mock_episodes())),
          inception_(rein::load_inception_setup(prompts_dir(), include_unseen, false)),
          phrase_(rein::load_inception_setup(prompts_dir(), include_unseen, true)) {
        inception_.model_id = phrase_.model_id = "mock";
        for (auto d : {rein::Domain::AirlineMini, rein::Domain::RetailMini}) domains_.emplace(d, domain(d));
    }

    const DomainData& data(rein::Domain d) const { return domains_.at(d); }

    RecordedEpisode run(const rein::Scenario& s, const rein::RunMode& mode) const {
        const std::string tag = mode.tag();
        rein::ScriptedClient agent(script_.steps("agent", s.id, tag), "agent");
        rein::ScriptedClient user(script_.steps("user", s.id, tag), "user");
        rein::ScriptedClient inc(script_.steps("inception", s.id, tag), "inception");
        rein::RecordingClient ra(agent), ru(user), ri(inc);
        const auto& dd = domains_.at(s.domain);
        rein::EpisodeSetup setup;
        setup.registry = &dd.registry;
        setup.initial_env = &dd.env;
        setup.agent = agent_config(dd.system_prompt);
        setup.inception = mode.kind == rein::ModeKind::PhraseVariantReIn ? &phrase_ : &inception_;
        setup.user = user_config();
        RecordedEpisode out;
        out.record = rein::run_episode(s, mode, {&ra, mode.uses_inception() ? &ri : nullptr, &ru}, setup);
        out.agent_requests = ra.requests();
        out.inception_requests = ri.requests();
        out.user_requests = ru.requests();
        return out;
    }

private:
    rein::MockScript script_;
    rein::InceptionSetup inception_, phrase_;
    std::map<rein::Domain, DomainData> domains_;
};

inline const std::vector<std::string>& all_mode_tags() {
    static const std::vector<std::string> tags{"baseline", "targeted", "dynamic", "npi", "self_refine", "phrase_variant"};
    return tags;
}

// Run config over the shipped mock data with outputs under runs_dir.
inline rein::RunConfig mock_run_config(const std::filesystem::path& runs_dir, const std::string& run_id) {
    rein::RunConfig c = rein::load_config(data_dir() / "config" / "mock_run.json");
    c.runs_dir = runs_dir;
    c.run_id = run_id;
    return c;
}

// Every regular file under dir, relative path -> bytes.
inline std::map<std::string, std::string> snapshot(const std::filesystem::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
        if (e.is_regular_file())
            out[std::filesystem::relative(e.path(), dir).generic_string()] = rein::read_text_file(e.path());
    return out;
}

}  // namespace fixtures
