#include "rein/commands.hpp"

#include <atomic>
#include <csignal>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "rein/curation.hpp"
#include "rein/error.hpp"
#include "rein/providers.hpp"
#include "rein/report.hpp"
#include "rein/simulation.hpp"
#include "rein/text.hpp"

namespace rein {

namespace {
volatile std::sig_atomic_t g_stop = 0;
}

void request_stop() { g_stop = 1; }
void clear_stop() { g_stop = 0; }
bool stop_requested() { return g_stop != 0; }

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

MockScript::MockScript(json doc) : doc_(std::move(doc)) {
    if (!doc_.is_object()) throw ConfigError("mock script must be a JSON object");
}

MockScript MockScript::load(const std::filesystem::path& file) {
    try {
        return MockScript(json::parse(read_text_file(file)));
    } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

std::vector<ScriptStep> MockScript::steps(const std::string& role, const std::string& scenario_id,
                                          const std::string& mode) const {
    try {
        if (!scenario_id.empty() && doc_.contains("scenarios")) {
            const json& sc = doc_["scenarios"];
            for (const std::string& key : {scenario_id + "." + mode, scenario_id}) {
                if (sc.contains(key) && sc[key].contains(role)) return script_from_json(sc[key][role]);
            }
        }
        if (doc_.contains(role)) return script_from_json(doc_[role]);
    } catch (const json::exception& e) {
        throw ConfigError("bad mock script entry for " + role + ": " + e.what());
    }
    return {};
}

std::vector<ScriptStep> MockScript::judge_steps(std::size_t index) const {
    if (!doc_.contains("judges") || index >= doc_["judges"].size()) return {};
    try {
        return script_from_json(doc_["judges"][index]);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad mock judge script: ") + e.what());
    }
}

namespace {

// Builds the per-role clients: scripted for "mock", HTTP otherwise, always
// behind validation, the shared budget and retries.
class ClientFactory {
public:
    explicit ClientFactory(const RunConfig& cfg)
        : cfg_(cfg), budget_(std::make_shared<Budget>(cfg.budget_tokens, cfg.budget_calls)) {
        if (cfg.mock_script) mock_ = MockScript::load(*cfg.mock_script);
    }

    std::shared_ptr<ChatClient> make(const std::string& model_id, std::vector<ScriptStep> steps, const std::string& name,
                                     std::uint64_t seed) {
        std::shared_ptr<ChatClient> inner;
        if (is_mock_model(model_id)) {
            inner = std::make_shared<ScriptedClient>(std::move(steps), name);
        } else {
            ModelRef ref = parse_model_ref(model_id);
            std::lock_guard lock(mu_);
            auto& slot = http_[ref.provider];
            if (!slot) slot = std::make_shared<HttpChatClient>(provider_from_env(provider_kind_from_string(ref.provider)));
            inner = slot;
        }
        RetryPolicy policy;
        policy.max_attempts = cfg_.retry_attempts;
        policy.base_delay = std::chrono::milliseconds(cfg_.retry_base_ms);
        policy.seed = seed;
        return std::make_shared<ResilientClient>(std::move(inner), policy, budget_);
    }

    const MockScript* mock() const { return mock_ ? &*mock_ : nullptr; }
    std::vector<ScriptStep> steps(const std::string& role, const std::string& id = {}, const std::string& mode = {}) const {
        return mock_ ? mock_->steps(role, id, mode) : std::vector<ScriptStep>{};
    }
    const Budget& budget() const { return *budget_; }

private:
    const RunConfig& cfg_;
    std::shared_ptr<Budget> budget_;
    std::optional<MockScript> mock_;
    std::map<std::string, std::shared_ptr<ChatClient>> http_;
    std::mutex mu_;
};

struct DomainAssets {
    ToolRegistry registry;
    Environment env;
    std::string system_prompt;
};

std::map<Domain, DomainAssets> load_domains(const RunConfig& cfg, bool with_prompts) {
    std::map<Domain, DomainAssets> out;
    for (const auto& name : cfg.domains) {
        Domain d = domain_from_string(name);
        ToolRegistry reg = load_registry(cfg.tools_dir, d);
        auto db = cfg.db_dir / (name + ".json");
        Environment env = std::filesystem::exists(db) ? Environment::load(d, db) : Environment(d, json::object());
        std::string prompt = with_prompts ? read_text_file(cfg.prompts_dir / ("system_" + name + ".md")) : std::string();
        out.emplace(d, DomainAssets{std::move(reg), std::move(env), std::move(prompt)});
    }
    return out;
}

std::string reasons_text(const ScoreVerdict& v) {
    std::string s;
    for (auto r : v.reasons) {
        if (!s.empty()) s += ',';
        s += to_string(r);
    }
    return s;
}

}  // namespace

int cmd_curate(RunConfig cfg, std::ostream& out, std::ostream& err) {
    cfg.resolve_paths();
    std::map<Domain, DomainAssets> domains;
    std::vector<RawSession> raw;
    GenerationSetup gen;
    JudgeSetup judge;
    std::vector<ErrorId> grid;
    std::unique_ptr<ClientFactory> factory;
    try {
        validate_curate_config(cfg);
        domains = load_domains(cfg, false);
        for (auto& s : load_raw_sessions(cfg.raw_dir))
            if (domains.count(s.domain)) raw.push_back(std::move(s));
        gen = load_generation_setup(cfg.prompts_dir);
        gen.model_id = cfg.generator_model;
        gen.temperature = cfg.temperatures.generator;
        judge = load_judge_setup(cfg.prompts_dir);
        judge.model_ids = cfg.judge_models;
        judge.temperature = cfg.temperatures.judge;
        if (cfg.review_file) judge.approvals = load_review_file(*cfg.review_file);
        if (cfg.error_types.empty())
            grid.assign(std::begin(kAllErrorIds), std::end(kAllErrorIds));
        else
            for (const auto& e : cfg.error_types) grid.push_back(error_id_from_string(e));
        factory = std::make_unique<ClientFactory>(cfg);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    std::map<Domain, ToolRegistry> registries;
    for (const auto& [d, a] : domains) registries.emplace(d, a.registry);
    MutatingLookup is_mutating = mutating_lookup(registries);

    std::vector<RawSession> kept;
    for (const auto& s : raw) {
        if (auto why = filter_reason(s, is_mutating)) {
            out << "drop " << s.id << ": " << to_string(*why) << '\n';
            continue;
        }
        kept.push_back(s);
    }
    out << kept.size() << " of " << raw.size() << " sessions kept\n";

    auto generator = factory->make(cfg.generator_model, factory->steps("generator"), "generator", cfg.seed);
    std::vector<std::shared_ptr<ChatClient>> judge_owners;
    std::vector<ChatClient*> judges;
    for (std::size_t i = 0; i < cfg.judge_models.size(); ++i) {
        judge_owners.push_back(factory->make(cfg.judge_models[i],
                                             factory->mock() ? factory->mock()->judge_steps(i) : std::vector<ScriptStep>{},
                                             "judge_" + std::to_string(i), cfg.seed + i + 1));
        judges.push_back(judge_owners.back().get());
    }

    std::vector<ContextCandidate> accepted;
    std::map<std::string, const RawSession*> by_session;
    std::ostringstream qa_log;
    qa_log << "id\taccepted\treason\ttokens\tvotes\n";
    std::size_t gen_failures = 0;
    try {
        for (const auto& s : kept) {
            by_session[s.id] = &s;
            auto tools = domains.at(s.domain).registry.specs();
            for (ErrorId e : grid) {
                ContextCandidate cand;
                try {
                    cand = generate_context(*generator, s, e, tools, gen);
                } catch (const GenerationSchemaViolation& ex) {
                    ++gen_failures;
                    err << "generation failed for " << s.id << "-" << error_key(e) << ": " << ex.what() << '\n';
                    continue;
                } catch (const GatewayError& ex) {
                    ++gen_failures;
                    err << "generator unavailable for " << s.id << "-" << error_key(e) << ": " << ex.what() << '\n';
                    continue;
                }
                QaResult qa = qa_filter(cand, judges, judge);
                std::string votes;
                for (bool v : qa.candidate.judge_votes) votes += v ? '1' : '0';
                qa_log << qa.candidate.id << '\t' << (qa.accepted ? 1 : 0) << '\t'
                       << (qa.reason ? std::string(to_string(*qa.reason)) : std::string("-")) << '\t'
                       << qa.candidate.token_count << '\t' << (votes.empty() ? "-" : votes) << '\n';
                if (qa.accepted) accepted.push_back(qa.candidate);
            }
        }
    } catch (const BudgetExceeded& e) {
        err << "error: " << e.what() << '\n';
        return kExitSystemic;
    }

    DatasetSplit split = split_dataset(accepted, judge.token_limit);
    try {
        for (const auto* part : {&split.seen, &split.unseen}) {
            for (const auto& c : *part) {
                Scenario sc = candidate_to_scenario(c, *by_session.at(c.session_id), is_mutating);
                const auto& a = domains.at(c.domain);
                apply_ground_truth(a.env, a.registry, sc.ground_truth_actions);
                auto file = cfg.curate_out / "scenarios" / std::string(to_string(c.domain)) /
                            (sc.seen ? "seen" : "unseen") / (sc.id + ".json");
                save_scenario(file, sc);
            }
        }
    } catch (const GroundTruthFailed& e) {
        err << "error: curated ground truth does not replay: " << e.what() << '\n';
        return kExitSystemic;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitSystemic;
    }
    write_file_atomic(cfg.curate_out / "stats.txt", split_stats_text(split));
    write_file_atomic(cfg.curate_out / "stats.csv", split_stats_csv(split));
    write_file_atomic(cfg.curate_out / "qa.tsv", qa_log.str());
    out << split_stats_text(split);
    return gen_failures ? kExitPartial : kExitOk;
}

int cmd_run(RunConfig cfg, std::ostream& out, std::ostream& err) {
    cfg.resolve_paths();
    std::map<Domain, DomainAssets> domains;
    std::vector<Scenario> scenarios;
    std::vector<RunMode> modes;
    InceptionSetup inception, phrase_inception;
    AgentConfig agent_base;
    UserSimConfig user;
    std::unique_ptr<ClientFactory> factory;
    try {
        validate_run_config(cfg);
        domains = load_domains(cfg, true);
        bool any_phrase = false, any_inception = false;
        for (const auto& m : cfg.modes) {
            RunMode rm = RunMode::parse(m);
            rm.turn_index = cfg.targeted_turn;
            if (std::find(modes.begin(), modes.end(), rm) != modes.end()) continue;
            modes.push_back(rm);
            any_phrase = any_phrase || rm.kind == ModeKind::PhraseVariantReIn;
            any_inception = any_inception || rm.uses_inception();
        }
        if (any_inception) {
            inception = load_inception_setup(cfg.prompts_dir, cfg.include_unseen, false);
            inception.model_id = cfg.inception_model;
            inception.temperature = cfg.temperatures.inception;
        }
        if (any_phrase) {
            phrase_inception = load_inception_setup(cfg.prompts_dir, cfg.include_unseen, true);
            phrase_inception.model_id = cfg.inception_model;
            phrase_inception.temperature = cfg.temperatures.inception;
        }
        agent_base.npi_block = read_text_file(cfg.prompts_dir / "npi.md");
        agent_base.sr_feedback_template = read_text_file(cfg.prompts_dir / "sr_feedback.md");
        agent_base.sr_revision_template = read_text_file(cfg.prompts_dir / "sr_revision.md");
        agent_base.model_id = cfg.agent_model;
        agent_base.temperature = cfg.temperatures.agent;
        agent_base.max_steps = cfg.max_steps;
        user.system_template = read_text_file(cfg.prompts_dir / "usersim.md");
        user.model_id = cfg.user_model;
        user.temperature = cfg.temperatures.user;

        const std::set<std::string> wanted(cfg.scenario_ids.begin(), cfg.scenario_ids.end());
        std::set<std::string> missing = wanted;
        for (auto& s : load_scenarios(cfg.scenarios_dir)) {
            if (!domains.count(s.domain)) continue;
            if (!wanted.empty() && !wanted.count(s.id)) continue;
            // ground truth must replay before anything is spent
            const auto& a = domains.at(s.domain);
            apply_ground_truth(a.env, a.registry, s.ground_truth_actions);
            missing.erase(s.id);
            scenarios.push_back(std::move(s));
        }
        if (!missing.empty()) throw ConfigError("unknown scenario id '" + *missing.begin() + "'");
        if (scenarios.empty()) throw ConfigError("no scenarios found under " + cfg.scenarios_dir.string());
        factory = std::make_unique<ClientFactory>(cfg);
    } catch (const GroundTruthFailed& e) {
        err << "error: " << e.what() << '\n';
        return kExitSystemic;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    struct Task {
        const Scenario* scenario;
        RunMode mode;
        std::filesystem::path file;
        std::uint64_t seed;
    };
    std::vector<const Scenario*> order;
    for (const auto& s : scenarios) order.push_back(&s);
    seeded_shuffle(order, cfg.seed);

    const auto episodes_dir = cfg.run_dir() / "episodes";
    std::filesystem::create_directories(episodes_dir);
    std::vector<Task> tasks;
    std::size_t resumed = 0;
    for (const auto* s : order) {
        for (const auto& m : modes) {
            auto file = episodes_dir / (s->id + "." + m.tag() + ".jsonl");
            if (std::filesystem::exists(file)) {
                try {
                    EpisodeRecord r = load_episode(file);
                    if (r.scenario_id == s->id && r.mode == m.tag() && r.verdict) {
                        ++resumed;
                        continue;
                    }
                } catch (const std::exception&) {
                    // truncated by an interrupted write; rerun it
                }
            }
            tasks.push_back({s, m, file, cfg.seed ^ fnv1a64(s->id + "." + m.tag())});
        }
    }
    out << "run " << cfg.run_id << ": " << tasks.size() << " episodes to run, " << resumed << " already complete\n";

    std::atomic<std::size_t> next{0}, started{0}, done{0}, failed{0}, aborted{0};
    std::atomic<bool> systemic{false};
    std::mutex log_mu;
    std::string systemic_msg;

    auto worker = [&] {
        for (;;) {
            if (stop_requested() || systemic) return;
            if (cfg.max_episodes && started.load() >= *cfg.max_episodes) return;
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            ++started;
            const Task& t = tasks[i];
            const Scenario& s = *t.scenario;
            const auto& assets = domains.at(s.domain);
            const std::string tag = t.mode.tag();
            try {
                auto agent = factory->make(cfg.agent_model, factory->steps("agent", s.id, tag), "agent", t.seed);
                auto user_client = factory->make(cfg.user_model, factory->steps("user", s.id, tag), "user", t.seed + 1);
                std::shared_ptr<ChatClient> inc;
                if (t.mode.uses_inception())
                    inc = factory->make(cfg.inception_model, factory->steps("inception", s.id, tag), "inception",
                                        t.seed + 2);
                EpisodeSetup setup;
                setup.registry = &assets.registry;
                setup.initial_env = &assets.env;
                setup.agent = agent_base;
                setup.agent.base_system_prompt = assets.system_prompt;
                setup.inception = t.mode.kind == ModeKind::PhraseVariantReIn ? &phrase_inception : &inception;
                setup.user = user;
                setup.max_turns = cfg.max_turns;
                setup.scoring = ScoringRules{cfg.phrase, cfg.phrase_substring};
                setup.seed = t.seed;
                EpisodeRecord rec = run_episode(s, t.mode, {agent.get(), inc.get(), user_client.get()}, setup);
                save_episode(t.file, rec);
                bool hard = rec.flags.count("agent_gateway_error") || rec.flags.count("user_gateway_error");
                if (hard) ++aborted;
                std::size_t k = ++done;
                std::lock_guard lock(log_mu);
                out << "[" << k << "/" << tasks.size() << "] " << s.id << " " << tag << " "
                    << (rec.verdict && rec.verdict->pass ? "PASS" : "FAIL") << " "
                    << (rec.verdict ? reasons_text(*rec.verdict) : std::string()) << '\n';
            } catch (const BudgetExceeded& e) {
                std::lock_guard lock(log_mu);
                if (!systemic.exchange(true)) systemic_msg = e.what();
                return;
            } catch (const std::exception& e) {
                ++failed;
                std::lock_guard lock(log_mu);
                err << "episode " << s.id << " " << tag << " failed: " << e.what() << '\n';
            }
        }
    };

    std::size_t n_workers = std::min<std::size_t>(cfg.workers, std::max<std::size_t>(tasks.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    try {
        write_summary(cfg.run_dir());
        out << '\n' << read_text_file(cfg.run_dir() / "summary.txt");
    } catch (const MissingRecords&) {
        out << "no episode records yet\n";
    }
    out << "calls: " << factory->budget().calls_made() << ", tokens: " << factory->budget().tokens_used() << '\n';

    if (systemic) {
        err << "error: " << systemic_msg << "; completed episodes are saved, rerun with the same run id to resume\n";
        return kExitSystemic;
    }
    if (stop_requested()) {
        err << "interrupted; rerun with the same run id to resume\n";
        return kExitPartial;
    }
    if (done < tasks.size() && cfg.max_episodes)
        out << "stopped after " << done.load() << " episodes; rerun with the same run id to resume\n";
    if (failed || aborted) return kExitPartial;
    return kExitOk;
}

int cmd_report(const std::vector<std::filesystem::path>& run_dirs, const std::optional<std::filesystem::path>& out_file,
               std::ostream& out, std::ostream& err) {
    if (run_dirs.empty()) {
        err << "error: no run directory given\n";
        return kExitUsage;
    }
    std::vector<std::vector<EpisodeRecord>> runs;
    std::vector<std::string> names;
    std::ostringstream text;
    try {
        for (const auto& d : run_dirs) {
            runs.push_back(load_run(d));
            std::string name = d.lexically_normal().string();
            if (name.size() > 1 && name.back() == '/') name.pop_back();
            names.push_back(name);
        }
        for (std::size_t i = 0; i < runs.size(); ++i) {
            if (runs.size() > 1) text << "== " << names[i] << " ==\n";
            text << summary_text(summarize(runs[i]), context_counts(runs[i]));
            if (runs.size() > 1) text << '\n';
        }
        if (runs.size() > 1) text << agreement_text(agreement(runs), names);
    } catch (const MissingRecords& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitSystemic;
    }
    out << text.str();
    if (out_file) write_file_atomic(*out_file, text.str());
    return kExitOk;
}

}  // namespace rein
