#include "rein/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "rein/error.hpp"
#include "rein/metrics.hpp"
#include "rein/text.hpp"

namespace rein {

std::vector<EpisodeRecord> load_run(const std::filesystem::path& run_dir) {
    auto dir = run_dir / "episodes";
    if (!std::filesystem::is_directory(dir)) throw MissingRecords("no episodes directory in " + run_dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    if (files.empty()) throw MissingRecords("no episode records in " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<EpisodeRecord> out;
    for (const auto& f : files) out.push_back(load_episode(f));
    return out;
}

namespace {

bool passed(const EpisodeRecord& r) { return r.verdict && r.verdict->pass; }

SummaryRow make_row(std::string mode, std::string situation, std::string type, const std::vector<const EpisodeRecord*>& rs) {
    SummaryRow row;
    row.mode = std::move(mode);
    row.situation = std::move(situation);
    row.error_type = std::move(type);
    row.n = rs.size();
    std::size_t yes_records = 0, calls = 0, yes_calls = 0;
    for (const auto* r : rs) {
        row.passes += passed(*r);
        bool any = false;
        for (const auto& a : r->activations) {
            ++calls;
            yes_calls += a.verdict.yes();
            any = any || a.verdict.yes();
        }
        yes_records += any;
    }
    Rate p = pass_at_1(row.passes, row.n);
    row.pass_rate = p.rate;
    row.sem = p.sem;
    if (RunMode::parse(row.mode).uses_inception()) {
        row.activation = activation_rate(yes_records, row.n);
        if (calls) row.turn_activation = activation_rate(yes_calls, calls);
    }
    return row;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string pct(const std::optional<double>& v) { return v ? fmt("%.2f", *v * 100.0) : std::string("-"); }

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<EpisodeRecord>& records) {
    using Key = std::tuple<std::string, std::string, std::string>;
    std::map<Key, std::vector<const EpisodeRecord*>> groups;
    std::map<std::pair<std::string, std::string>, std::vector<const EpisodeRecord*>> by_situation;
    std::map<std::string, std::vector<const EpisodeRecord*>> by_mode;
    for (const auto& r : records) {
        std::string sit(to_string(situation_of(r.error_type)));
        groups[{r.mode, sit, std::string(error_key(r.error_type))}].push_back(&r);
        by_situation[{r.mode, sit}].push_back(&r);
        by_mode[r.mode].push_back(&r);
    }
    std::vector<SummaryRow> rows;
    for (const auto& [mode, all] : by_mode) {
        for (const auto& [key, rs] : groups)
            if (std::get<0>(key) == mode) rows.push_back(make_row(mode, std::get<1>(key), std::get<2>(key), rs));
        for (const auto& [key, rs] : by_situation)
            if (key.first == mode) rows.push_back(make_row(mode, key.second, "all", rs));
        rows.push_back(make_row(mode, "all", "all", all));
    }
    return rows;
}

std::vector<ContextCountRow> context_counts(const std::vector<EpisodeRecord>& records) {
    struct Acc {
        std::set<std::string> seen, unseen, sessions;
    };
    std::map<std::string, Acc> per;
    for (const auto& r : records) {
        auto& a = per[std::string(to_string(r.domain))];
        (r.seen ? a.seen : a.unseen).insert(r.scenario_id);
        // scenario ids are "<session>-<error key>"
        std::string key(error_key(r.error_type));
        std::string sid = r.scenario_id;
        if (sid.size() > key.size() + 1 && sid.compare(sid.size() - key.size(), key.size(), key) == 0)
            sid = sid.substr(0, sid.size() - key.size() - 1);
        a.sessions.insert(sid);
    }
    std::vector<ContextCountRow> rows;
    ContextCountRow total;
    total.domain = "total";
    for (const auto& [domain, a] : per) {
        rows.push_back({domain, a.sessions.size(), a.seen.size(), a.unseen.size()});
        total.sessions += a.sessions.size();
        total.seen += a.seen.size();
        total.unseen += a.unseen.size();
    }
    rows.push_back(total);
    return rows;
}

AgreementTable agreement(const std::vector<std::vector<EpisodeRecord>>& runs) {
    AgreementTable t;
    if (runs.size() < 2) return t;
    using Key = std::pair<std::string, std::string>;
    std::vector<std::map<Key, bool>> maps;
    for (const auto& run : runs) {
        std::map<Key, bool> m;
        for (const auto& r : run) m[{r.scenario_id, r.mode}] = passed(r);
        maps.push_back(std::move(m));
    }
    std::vector<Key> keys;
    for (const auto& [k, v] : maps.front())
        if (std::all_of(maps.begin(), maps.end(), [&](const auto& m) { return m.count(k) > 0; })) keys.push_back(k);
    t.items = keys.size();
    if (keys.empty()) throw MissingRecords("runs share no (scenario, mode) records");
    std::vector<std::vector<bool>> cols(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (const auto& k : keys) cols[i].push_back(maps[i].at(k));
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (std::size_t j = i + 1; j < runs.size(); ++j)
            t.pairs.push_back({i, j, cohen_kappa(cols[i], cols[j]), mcnemar(cols[i], cols[j])});
    if (runs.size() >= 3) {
        std::vector<std::vector<bool>> matrix(keys.size(), std::vector<bool>(runs.size()));
        for (std::size_t r = 0; r < keys.size(); ++r)
            for (std::size_t c = 0; c < runs.size(); ++c) matrix[r][c] = cols[c][r];
        t.fleiss_kappa = fleiss_kappa(matrix);
    }
    return t;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "mode,situation,error_type,n,passes,pass_at_1,sem,activation_rate,turn_activation_rate\n";
    for (const auto& r : rows) {
        os << r.mode << ',' << r.situation << ',' << r.error_type << ',' << r.n << ',' << r.passes << ','
           << fmt("%.6f", r.pass_rate) << ',' << fmt("%.6f", r.sem) << ','
           << (r.activation ? fmt("%.6f", *r.activation) : "") << ','
           << (r.turn_activation ? fmt("%.6f", *r.turn_activation) : "") << '\n';
    }
    return os.str();
}

std::string summary_text(const std::vector<SummaryRow>& rows, const std::vector<ContextCountRow>& counts) {
    std::ostringstream os;
    char line[256];
    os << "Pass@1 by mode and scenario type\n\n";
    std::snprintf(line, sizeof line, "%-15s %-12s %-24s %5s %6s %9s %7s %8s %8s\n", "mode", "situation", "error_type",
                  "n", "passes", "pass@1 %", "sem %", "act %", "turn %");
    os << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-15s %-12s %-24s %5zu %6zu %9.2f %7.2f %8s %8s\n", r.mode.c_str(),
                      r.situation.c_str(), r.error_type.c_str(), r.n, r.passes, r.pass_rate * 100.0, r.sem * 100.0,
                      pct(r.activation).c_str(), pct(r.turn_activation).c_str());
        os << line;
    }
    os << "\nContexts\n\n";
    std::snprintf(line, sizeof line, "%-10s %9s %6s %7s %6s\n", "domain", "sessions", "seen", "unseen", "total");
    os << line;
    for (const auto& c : counts) {
        std::snprintf(line, sizeof line, "%-10s %9zu %6zu %7zu %6zu\n", c.domain.c_str(), c.sessions, c.seen, c.unseen,
                      c.total());
        os << line;
    }
    return os.str();
}

std::string agreement_text(const AgreementTable& t, const std::vector<std::string>& run_names) {
    std::ostringstream os;
    char line[256];
    os << "Agreement across runs (" << t.items << " shared records)\n\n";
    std::snprintf(line, sizeof line, "%-24s %-24s %10s %10s\n", "run_a", "run_b", "cohen_k", "mcnemar_p");
    os << line;
    for (const auto& p : t.pairs) {
        std::snprintf(line, sizeof line, "%-24s %-24s %10.4f %10.4f\n", run_names.at(p.run_a).c_str(),
                      run_names.at(p.run_b).c_str(), p.cohen_kappa, p.mcnemar_p);
        os << line;
    }
    if (t.fleiss_kappa) os << "\nFleiss kappa: " << fmt("%.4f", *t.fleiss_kappa) << '\n';
    return os.str();
}

void write_summary(const std::filesystem::path& run_dir) {
    auto records = load_run(run_dir);
    auto rows = summarize(records);
    write_file_atomic(run_dir / "summary.csv", summary_csv(rows));
    write_file_atomic(run_dir / "summary.txt", summary_text(rows, context_counts(records)));
}

}  // namespace rein
