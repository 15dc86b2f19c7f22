#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "fixtures.hpp"
#include "rein/commands.hpp"
#include "rein/config.hpp"
#include "rein/curation.hpp"
#include "rein/error.hpp"
#include "rein/report.hpp"

using namespace rein;

namespace {

// Sets or clears an environment variable for the scope, then restores it.
class EnvGuard {
public:
    EnvGuard(const char* name, const char* value) : name_(name) {
        if (const char* old = std::getenv(name)) old_ = old;
        if (value)
            ::setenv(name, value, 1);
        else
            ::unsetenv(name);
    }
    ~EnvGuard() {
        if (old_)
            ::setenv(name_.c_str(), old_->c_str(), 1);
        else
            ::unsetenv(name_.c_str());
    }

private:
    std::string name_;
    std::optional<std::string> old_;
};

struct Ran {
    int code;
    std::string out, err;
};

Ran run(RunConfig cfg) {
    std::ostringstream out, err;
    int code = cmd_run(std::move(cfg), out, err);
    return {code, out.str(), err.str()};
}

Ran curate(RunConfig cfg) {
    std::ostringstream out, err;
    int code = cmd_curate(std::move(cfg), out, err);
    return {code, out.str(), err.str()};
}

std::map<std::string, std::string> episodes_only(const std::filesystem::path& run_dir) {
    return fixtures::snapshot(run_dir / "episodes");
}

}  // namespace

TEST_CASE("environment interpolation") {
    EnvGuard a("REIN_TEST_VAR", "gpt-x");
    EnvGuard b("REIN_TEST_UNSET", nullptr);
    json doc{{"agent_model", "openai:${REIN_TEST_VAR}"}, {"list", {"${REIN_TEST_VAR}", 3}}, {"n", 4}};
    json out = interpolate_env(doc);
    CHECK(out["agent_model"] == "openai:gpt-x");
    CHECK(out["list"][0] == "gpt-x");
    CHECK(out["list"][1] == 3);
    CHECK(out["n"] == 4);
    CHECK(interpolate_env(json("no vars $HOME {x}")) == "no vars $HOME {x}");
    CHECK_THROWS_AS(interpolate_env(json{{"k", "${REIN_TEST_UNSET}"}}), ConfigError);
}

TEST_CASE("config parsing") {
    CHECK_THROWS_AS(config_from_json(json{{"agnet_model", "mock"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"workers", "four"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"phrase_match", "regex"}}), ConfigError);

    auto c = config_from_json(json{{"paths", {{"data", "../d"}, {"runs", "/abs/runs"}}},
                                   {"mock_script", "m.json"},
                                   {"retry", {{"max_attempts", 2}, {"base_delay_ms", 10}}},
                                   {"phrase_match", "substring"},
                                   {"max_episodes", 3}},
                              "/cfg");
    CHECK(c.data_dir == std::filesystem::path("/cfg/../d"));
    CHECK(c.runs_dir == std::filesystem::path("/abs/runs"));
    CHECK(*c.mock_script == std::filesystem::path("/cfg/m.json"));
    CHECK(c.retry_attempts == 2);
    CHECK(c.retry_base_ms == 10);
    CHECK(c.phrase_substring);
    CHECK(c.max_episodes == 3u);
    c.resolve_paths();
    CHECK(c.prompts_dir == std::filesystem::path("/cfg/../d") / "prompts");

    auto shipped = fixtures::mock_run_config("runs", "x");
    CHECK(shipped.modes.size() == 6);
    CHECK(shipped.workers == 4);
    CHECK(std::filesystem::is_regular_file(*shipped.mock_script));
}

TEST_CASE("run config validation") {
    auto good = fixtures::mock_run_config("runs", "x");
    good.resolve_paths();
    CHECK_NOTHROW(validate_run_config(good));

    auto no_inc = good;
    no_inc.inception_model.clear();
    CHECK_THROWS_AS(validate_run_config(no_inc), ConfigError);
    no_inc.modes = {"baseline", "npi", "self_refine"};
    CHECK_NOTHROW(validate_run_config(no_inc));

    auto bad_dir = good;
    bad_dir.scenarios_dir = "/definitely/not/here";
    CHECK_THROWS_AS(validate_run_config(bad_dir), ConfigError);

    auto bad_mode = good;
    bad_mode.modes = {"nonsense"};
    CHECK_THROWS_AS(validate_run_config(bad_mode), ConfigError);

    auto bad_temp = good;
    bad_temp.temperatures.user = 1.5;
    CHECK_THROWS_AS(validate_run_config(bad_temp), ConfigError);

    auto bad_id = good;
    bad_id.run_id = "a/b";
    CHECK_THROWS_AS(validate_run_config(bad_id), ConfigError);

    auto no_script = good;
    no_script.mock_script.reset();
    CHECK_THROWS_AS(validate_run_config(no_script), ConfigError);

    EnvGuard k("OPENAI_API_KEY", nullptr);
    auto live = good;
    live.agent_model = "openai:gpt-test";
    CHECK_THROWS_AS(validate_run_config(live), ConfigError);
    {
        EnvGuard k2("OPENAI_API_KEY", "sk-test");
        CHECK_NOTHROW(validate_run_config(live));
    }
    live.agent_model = "nope";
    CHECK_THROWS_AS(validate_run_config(live), ConfigError);
}

TEST_CASE("curate config validation") {
    auto c = load_config(fixtures::data_dir() / "config" / "mock_curate.json");
    c.resolve_paths();
    CHECK_NOTHROW(validate_curate_config(c));
    auto no_judges = c;
    no_judges.judge_models.clear();
    CHECK_THROWS_AS(validate_curate_config(no_judges), ConfigError);
    auto bad_type = c;
    bad_type.error_types = {"sarcasm"};
    CHECK_THROWS_AS(validate_curate_config(bad_type), ConfigError);
    auto no_raw = c;
    no_raw.raw_dir = "/definitely/not/here";
    CHECK_THROWS_AS(validate_curate_config(no_raw), ConfigError);
}

TEST_CASE("seeding helpers") {
    // FNV-1a 64 published test vectors
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);

    std::vector<int> v(20);
    for (int i = 0; i < 20; ++i) v[i] = i;
    auto a = v, b = v, c = v;
    seeded_shuffle(a, 9);
    seeded_shuffle(b, 9);
    seeded_shuffle(c, 10);
    CHECK(a == b);
    CHECK(a != c);
    std::sort(a.begin(), a.end());
    CHECK(a == v);
}

TEST_CASE("mock script lookup precedence") {
    MockScript m(json{{"agent", {{{"text", "top"}}}},
                      {"scenarios",
                       {{"s1", {{"agent", {{{"text", "scenario"}}}}}},
                        {"s1.targeted", {{"agent", {{{"text", "mode"}}}}}}}},
                      {"judges", {{{{"text", "j0"}}}, {{{"text", "j1"}}}}}});
    CHECK(m.steps("agent", "s1", "targeted").at(0).response.text == "mode");
    CHECK(m.steps("agent", "s1", "baseline").at(0).response.text == "scenario");
    CHECK(m.steps("agent", "s2", "targeted").at(0).response.text == "top");
    CHECK(m.steps("user", "s1", "targeted").empty());
    CHECK(m.judge_steps(1).at(0).response.text == "j1");
    CHECK(m.judge_steps(5).empty());
}

TEST_CASE("mock runs are deterministic") {
    fixtures::TempDir dir;
    auto a = run(fixtures::mock_run_config(dir.path(), "a"));
    REQUIRE_MESSAGE(a.code == kExitOk, a.err);
    auto serial = fixtures::mock_run_config(dir.path(), "b");
    serial.workers = 1;
    auto b = run(serial);
    REQUIRE(b.code == kExitOk);
    auto ea = episodes_only(dir.path() / "a"), eb = episodes_only(dir.path() / "b");
    CHECK(ea.size() == 36);
    CHECK(ea == eb);
    CHECK(read_text_file(dir.path() / "a" / "summary.csv") == read_text_file(dir.path() / "b" / "summary.csv"));

    // a complete run resumes without work
    auto again = run(fixtures::mock_run_config(dir.path(), "a"));
    CHECK(again.code == kExitOk);
    CHECK(again.out.find("0 episodes to run, 36 already complete") != std::string::npos);
    CHECK(episodes_only(dir.path() / "a") == ea);
}

TEST_CASE("interrupted runs resume to the same records") {
    fixtures::TempDir dir;
    auto full = run(fixtures::mock_run_config(dir.path(), "full"));
    REQUIRE(full.code == kExitOk);

    auto part = fixtures::mock_run_config(dir.path(), "part");
    part.max_episodes = 10;
    auto first = run(part);
    CHECK(first.code == kExitOk);
    CHECK(episodes_only(dir.path() / "part").size() == 10);
    // a torn file from an interrupted write is redone
    auto files = episodes_only(dir.path() / "part");
    auto torn = dir.path() / "part" / "episodes" / files.begin()->first;
    std::string bytes = read_text_file(torn);
    write_file_atomic(torn, bytes.substr(0, bytes.size() / 2));

    part.max_episodes.reset();
    auto rest = run(part);
    CHECK(rest.code == kExitOk);
    CHECK(rest.out.find("27 episodes to run, 9 already complete") != std::string::npos);
    CHECK(episodes_only(dir.path() / "part") == episodes_only(dir.path() / "full"));
}

TEST_CASE("run failures map to exit codes") {
    fixtures::TempDir dir;
    auto tiny = fixtures::mock_run_config(dir.path(), "tiny");
    tiny.budget_calls = 3;
    tiny.workers = 1;
    auto r = run(tiny);
    CHECK(r.code == kExitSystemic);
    CHECK(r.err.find("resume") != std::string::npos);

    auto bad = fixtures::mock_run_config(dir.path(), "bad");
    bad.scenario_ids = {"no_such_scenario"};
    CHECK(run(bad).code == kExitUsage);

    auto missing = fixtures::mock_run_config(dir.path(), "m");
    missing.data_dir = dir.path() / "nothing";
    CHECK(run(missing).code == kExitUsage);

    auto one = fixtures::mock_run_config(dir.path(), "one");
    one.scenario_ids = {"air_0001-anaphora"};
    one.modes = {"targeted"};
    auto ok = run(one);
    CHECK(ok.code == kExitOk);
    CHECK(episodes_only(dir.path() / "one").size() == 1);
}

TEST_CASE("curate over the mock script") {
    fixtures::TempDir dir;
    auto cfg = load_config(fixtures::data_dir() / "config" / "mock_curate.json");
    cfg.curate_out = dir.path() / "out1";
    auto r = curate(cfg);
    REQUIRE_MESSAGE(r.code == kExitOk, r.err);
    CHECK(r.out.find("5 of 9 sessions kept") != std::string::npos);
    for (const char* drop : {"drop air_0005: no_mutating_annotation", "drop air_0006: outputs_key",
                             "drop air_0007: requires_transfer", "drop ret_0003: outputs_key"})
        CHECK_MESSAGE(r.out.find(drop) != std::string::npos, drop);

    auto csv = read_text_file(cfg.curate_out / "stats.csv");
    CHECK(csv.find("total,5,19,7,26") != std::string::npos);
    auto qa = read_text_file(cfg.curate_out / "qa.tsv");
    CHECK(qa.find("air_0002-contradiction\t0\tturn_count") != std::string::npos);
    CHECK(qa.find("air_0003-anaphora\t0\ttoken_budget") != std::string::npos);
    CHECK(qa.find("ret_0001-unsupported_domain\t0\tjudge_rejected") != std::string::npos);
    CHECK(qa.find("ret_0002-contradiction\t0\tauthor_rejected") != std::string::npos);

    auto scen = load_scenarios(cfg.curate_out / "scenarios");
    CHECK(scen.size() == 26);
    for (const auto& s : scen) CHECK(s.initial_context.size() == 3);

    // byte-identical on a rerun
    auto cfg2 = cfg;
    cfg2.curate_out = dir.path() / "out2";
    REQUIRE(curate(cfg2).code == kExitOk);
    CHECK(fixtures::snapshot(cfg.curate_out) == fixtures::snapshot(cfg2.curate_out));

    auto bad = cfg;
    bad.raw_dir = dir.path() / "missing";
    CHECK(curate(bad).code == kExitUsage);
}

TEST_CASE("report command") {
    fixtures::TempDir dir;
    auto cfg = fixtures::mock_run_config(dir.path(), "r1");
    cfg.modes = {"baseline", "targeted"};
    REQUIRE(run(cfg).code == kExitOk);
    cfg.run_id = "r2";
    REQUIRE(run(cfg).code == kExitOk);

    std::ostringstream out, err;
    CHECK(cmd_report({dir.path() / "r1"}, std::nullopt, out, err) == kExitOk);
    CHECK(out.str().find("Pass@1") != std::string::npos);

    std::ostringstream out2, err2;
    auto file = dir.path() / "report.txt";
    CHECK(cmd_report({dir.path() / "r1", dir.path() / "r2"}, file, out2, err2) == kExitOk);
    auto text = read_text_file(file);
    CHECK(text.find("cohen_k") != std::string::npos);
    CHECK(text.find("1.0000") != std::string::npos);

    std::ostringstream o3, e3;
    CHECK(cmd_report({dir.path() / "nope"}, std::nullopt, o3, e3) == kExitUsage);
    CHECK(cmd_report({}, std::nullopt, o3, e3) == kExitUsage);
}
