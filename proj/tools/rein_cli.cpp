// rein: curate scenarios, run episodes, report metrics.

#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "rein/commands.hpp"
#include "rein/error.hpp"

namespace {

struct Flags {
    std::string config;
    std::vector<std::string> domains, modes, judge_models, scenarios, error_types;
    std::string agent_model, inception_model, user_model, generator_model;
    std::string mock_script, run_id, runs_dir, data_dir, scenarios_dir, review_file, out;
    std::optional<std::size_t> workers, max_turns, max_episodes, targeted_turn;
    std::optional<int> max_steps;
    std::optional<std::uint64_t> seed;
    std::optional<long long> budget_tokens, budget_calls;
    bool include_unseen = false;
};

void add_common(CLI::App* app, Flags& f) {
    app->add_option("--config", f.config, "JSON config file; flags override its values");
    app->add_option("--domain", f.domains, "Domain to use (repeatable): airline, retail");
    app->add_option("--mock-script", f.mock_script, "Scripted responses for models named 'mock'");
    app->add_option("--seed", f.seed, "Master seed");
    app->add_option("--budget-tokens", f.budget_tokens, "Stop once this many tokens are spent");
    app->add_option("--budget-calls", f.budget_calls, "Stop once this many model calls are made");
    app->add_option("--data-dir", f.data_dir, "Directory with prompts, tools, db and scenarios");
}

rein::RunConfig merge(const Flags& f) {
    rein::RunConfig c = f.config.empty() ? rein::RunConfig{} : rein::load_config(f.config);
    if (!f.domains.empty()) c.domains = f.domains;
    if (!f.modes.empty()) c.modes = f.modes;
    if (!f.judge_models.empty()) c.judge_models = f.judge_models;
    if (!f.scenarios.empty()) c.scenario_ids = f.scenarios;
    if (!f.error_types.empty()) c.error_types = f.error_types;
    if (!f.agent_model.empty()) c.agent_model = f.agent_model;
    if (!f.inception_model.empty()) c.inception_model = f.inception_model;
    if (!f.user_model.empty()) c.user_model = f.user_model;
    if (!f.generator_model.empty()) c.generator_model = f.generator_model;
    if (!f.mock_script.empty()) c.mock_script = f.mock_script;
    if (!f.run_id.empty()) c.run_id = f.run_id;
    if (!f.runs_dir.empty()) c.runs_dir = f.runs_dir;
    if (!f.data_dir.empty()) c.data_dir = f.data_dir;
    if (!f.scenarios_dir.empty()) c.scenarios_dir = f.scenarios_dir;
    if (!f.review_file.empty()) c.review_file = f.review_file;
    if (!f.out.empty()) c.curate_out = f.out;
    if (f.workers) c.workers = *f.workers;
    if (f.max_turns) c.max_turns = *f.max_turns;
    if (f.max_steps) c.max_steps = *f.max_steps;
    if (f.max_episodes) c.max_episodes = *f.max_episodes;
    if (f.targeted_turn) c.targeted_turn = *f.targeted_turn;
    if (f.seed) c.seed = *f.seed;
    if (f.budget_tokens) c.budget_tokens = *f.budget_tokens;
    if (f.budget_calls) c.budget_calls = *f.budget_calls;
    if (f.include_unseen) c.include_unseen = true;
    // a mock script stands in for every model left unset
    if (c.mock_script) {
        for (auto* m : {&c.agent_model, &c.inception_model, &c.user_model, &c.generator_model})
            if (m->empty()) *m = "mock";
        if (c.judge_models.empty()) c.judge_models = {"mock", "mock"};
    }
    return c;
}

void on_sigint(int) { rein::request_stop(); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reasoning inception for conversational agents: curate, run, report"};
    app.require_subcommand(1);
    Flags f;

    auto* curate = app.add_subcommand("curate", "Generate and filter error-seeded contexts from raw sessions");
    add_common(curate, f);
    curate->add_option("--generator-model", f.generator_model, "Model that synthesises contexts");
    curate->add_option("--judge-model", f.judge_models, "Judge model (repeatable)");
    curate->add_option("--error-type", f.error_types, "Restrict the error grid (repeatable)");
    curate->add_option("--review-file", f.review_file, "Author approvals, one 'id<TAB>approve' per line");
    curate->add_option("--out", f.out, "Output directory");

    auto* run = app.add_subcommand("run", "Run episodes and write per-episode records");
    add_common(run, f);
    run->add_option("--mode", f.modes, "Mode (repeatable): baseline, targeted, dynamic, npi, self_refine, phrase_variant");
    run->add_option("--agent-model", f.agent_model, "Task agent model, e.g. openai:gpt-4o");
    run->add_option("--inception-model", f.inception_model, "Inception module model");
    run->add_option("--user-model", f.user_model, "User simulator model");
    run->add_option("--workers", f.workers, "Concurrent episodes");
    run->add_option("--max-turns", f.max_turns, "Turn cap per episode");
    run->add_option("--max-steps", f.max_steps, "Policy completions per turn");
    run->add_option("--targeted-turn", f.targeted_turn, "Turn at which targeted modes intervene");
    run->add_option("--max-episodes", f.max_episodes, "Stop after this many new episodes");
    run->add_option("--scenario", f.scenarios, "Only these scenario ids (repeatable)");
    run->add_option("--scenarios-dir", f.scenarios_dir, "Scenario directory");
    run->add_option("--run-id", f.run_id, "Run directory name under --runs-dir");
    run->add_option("--runs-dir", f.runs_dir, "Parent directory for runs");
    run->add_flag("--include-unseen", f.include_unseen, "Show unseen error definitions to the inception module");

    std::vector<std::string> report_dirs;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Summarise one run, or compare several");
    report->add_option("runs", report_dirs, "Run directories")->required();
    report->add_option("--out", report_out, "Also write the report to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : rein::kExitUsage;
    }

    std::signal(SIGINT, on_sigint);
    try {
        if (*report) {
            std::optional<std::filesystem::path> out;
            if (!report_out.empty()) out = report_out;
            std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
            return rein::cmd_report(dirs, out, std::cout, std::cerr);
        }
        rein::RunConfig cfg = merge(f);
        if (*curate) return rein::cmd_curate(cfg, std::cout, std::cerr);
        return rein::cmd_run(cfg, std::cout, std::cerr);
    } catch (const rein::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return rein::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return rein::kExitSystemic;
    }
}
