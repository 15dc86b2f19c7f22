#pragma once
// The curate / run / report commands behind the CLI.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rein/config.hpp"
#include "rein/llm.hpp"

namespace rein {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;     // bad flags or config
inline constexpr int kExitSystemic = 2;  // budget exhausted, unusable data
inline constexpr int kExitPartial = 3;   // some episodes failed or the run was interrupted

// Scripted responses for mock runs:
//   {"agent": [...], "inception": [...], "user": [...], "generator": [...],
//    "judges": [[...], ...], "scenarios": {"<id>" | "<id>.<mode>": {"agent": [...], ...}}}
// Lookups prefer "<id>.<mode>", then "<id>", then the top level.
class MockScript {
public:
    explicit MockScript(json doc);
    static MockScript load(const std::filesystem::path& file);

    std::vector<ScriptStep> steps(const std::string& role, const std::string& scenario_id = {},
                                  const std::string& mode = {}) const;
    std::vector<ScriptStep> judge_steps(std::size_t index) const;

private:
    json doc_;
};

// Async-signal-safe; in-flight episodes finish and are saved, no new ones start.
void request_stop();
void clear_stop();
bool stop_requested();

// Stable across platforms; used to derive per-episode seeds.
std::uint64_t fnv1a64(std::string_view s);

// Deterministic Fisher-Yates over mt19937_64.
template <class T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed);

int cmd_curate(RunConfig cfg, std::ostream& out, std::ostream& err);
int cmd_run(RunConfig cfg, std::ostream& out, std::ostream& err);
int cmd_report(const std::vector<std::filesystem::path>& run_dirs, const std::optional<std::filesystem::path>& out_file,
               std::ostream& out, std::ostream& err);

template <class T>
void seeded_shuffle(std::vector<T>& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace rein
