#pragma once
// Aggregate tables over run directories.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rein/simulation.hpp"

namespace rein {

// Loads runs/<id>/episodes/*.jsonl in file-name order. Throws MissingRecords
// when the directory holds no episodes.
std::vector<EpisodeRecord> load_run(const std::filesystem::path& run_dir);

struct SummaryRow {
    std::string mode;
    std::string situation;   // "ambiguous", "unsupported" or "all"
    std::string error_type;  // error key or "all"
    std::size_t n = 0;
    std::size_t passes = 0;
    double pass_rate = 0.0;
    double sem = 0.0;
    std::optional<double> activation;       // records with any Yes verdict
    std::optional<double> turn_activation;  // Yes verdicts over inception calls
};

// One row per (mode, situation, type) present, plus situation and mode totals.
// Absent groups produce no rows.
std::vector<SummaryRow> summarize(const std::vector<EpisodeRecord>& records);

struct ContextCountRow {
    std::string domain;
    std::size_t sessions = 0;
    std::size_t seen = 0;
    std::size_t unseen = 0;
    std::size_t total() const { return seen + unseen; }
};

// Distinct scenarios per domain, split by seen/unseen; last row is "total".
std::vector<ContextCountRow> context_counts(const std::vector<EpisodeRecord>& records);

struct AgreementPair {
    std::size_t run_a, run_b;
    double cohen_kappa;
    double mcnemar_p;
};

struct AgreementTable {
    std::size_t items = 0;
    std::vector<AgreementPair> pairs;
    std::optional<double> fleiss_kappa;  // when three or more runs
};

// Aligns records on (scenario_id, mode) keys present in every run.
AgreementTable agreement(const std::vector<std::vector<EpisodeRecord>>& runs);

std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string summary_text(const std::vector<SummaryRow>& rows, const std::vector<ContextCountRow>& counts);
std::string agreement_text(const AgreementTable& t, const std::vector<std::string>& run_names);

// Writes summary.csv and summary.txt into run_dir.
void write_summary(const std::filesystem::path& run_dir);

}  // namespace rein
