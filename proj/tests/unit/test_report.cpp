#include <doctest.h>

#include <algorithm>

#include "fixtures.hpp"
#include "rein/error.hpp"
#include "rein/metrics.hpp"
#include "rein/report.hpp"

using namespace rein;

namespace {

EpisodeRecord rec(const std::string& session, ErrorId e, const std::string& mode, bool pass,
                  Domain d = Domain::AirlineMini, int yes_turns = 0, int no_turns = 0) {
    EpisodeRecord r;
    r.scenario_id = session + "-" + std::string(error_key(e));
    r.mode = mode;
    r.error_type = e;
    r.seen = seen_by_default(e);
    r.domain = d;
    r.verdict = ScoreVerdict{pass, {}};
    InceptionVerdict yes;
    yes.decision = Decision::Yes;
    yes.plan = RecoveryPlan{plan_for(e), "plan"};
    std::size_t t = 1;
    for (int i = 0; i < yes_turns; ++i) r.activations.push_back({t++, yes});
    for (int i = 0; i < no_turns; ++i) r.activations.push_back({t++, InceptionVerdict{}});
    return r;
}

const SummaryRow* find(const std::vector<SummaryRow>& rows, const std::string& mode, const std::string& sit,
                       const std::string& type) {
    for (const auto& r : rows)
        if (r.mode == mode && r.situation == sit && r.error_type == type) return &r;
    return nullptr;
}

}  // namespace

TEST_CASE("summarize") {
    std::vector<EpisodeRecord> rs{
        rec("a1", ErrorId::Anaphora, "baseline", false),
        rec("a2", ErrorId::Anaphora, "baseline", true),
        rec("a3", ErrorId::UnsupportedAction, "baseline", false),
        rec("a1", ErrorId::Anaphora, "targeted", true, Domain::AirlineMini, 1, 0),
        rec("a2", ErrorId::Anaphora, "targeted", true, Domain::AirlineMini, 0, 1),
        rec("a3", ErrorId::UnsupportedAction, "targeted", false, Domain::AirlineMini, 1, 0),
        rec("a4", ErrorId::UnsupportedAction, "dynamic", true, Domain::AirlineMini, 1, 3),
    };
    auto rows = summarize(rs);

    const auto* b_ana = find(rows, "baseline", "ambiguous", "anaphora");
    REQUIRE(b_ana);
    CHECK(b_ana->n == 2);
    CHECK(b_ana->passes == 1);
    CHECK(b_ana->pass_rate == doctest::Approx(0.5));
    CHECK(b_ana->sem == doctest::Approx(std::sqrt(0.25 / 2)));
    CHECK_FALSE(b_ana->activation);
    const auto* b_all = find(rows, "baseline", "all", "all");
    REQUIRE(b_all);
    CHECK(b_all->n == 3);
    CHECK(b_all->pass_rate == doctest::Approx(1.0 / 3.0));

    const auto* t_all = find(rows, "targeted", "all", "all");
    REQUIRE(t_all);
    CHECK(t_all->pass_rate == doctest::Approx(2.0 / 3.0));
    REQUIRE(t_all->activation);
    CHECK(*t_all->activation == doctest::Approx(2.0 / 3.0));
    CHECK(*t_all->turn_activation == doctest::Approx(2.0 / 3.0));

    const auto* d_all = find(rows, "dynamic", "all", "all");
    REQUIRE(d_all);
    CHECK(*d_all->activation == 1.0);
    CHECK(*d_all->turn_activation == doctest::Approx(0.25));

    // absent groups produce no rows
    CHECK_FALSE(find(rows, "dynamic", "ambiguous", "all"));
    CHECK_FALSE(find(rows, "baseline", "ambiguous", "contradiction"));
    for (const auto& r : rows) CHECK(r.n > 0);

    // totals are consistent with their parts
    for (const std::string mode : {"baseline", "targeted", "dynamic"}) {
        std::size_t n = 0, passes = 0;
        for (const auto& r : rows)
            if (r.mode == mode && r.situation != "all" && r.error_type != "all") {
                n += r.n;
                passes += r.passes;
            }
        const auto* all = find(rows, mode, "all", "all");
        CHECK(all->n == n);
        CHECK(all->passes == passes);
    }

    auto csv = summary_csv(rows);
    CHECK(csv.rfind("mode,situation,error_type,n,passes,pass_at_1,sem,activation_rate,turn_activation_rate\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rows.size() + 1));
}

TEST_CASE("context counts") {
    std::vector<EpisodeRecord> rs;
    for (const std::string mode : {"baseline", "targeted"}) {
        rs.push_back(rec("air_0001", ErrorId::Anaphora, mode, true));
        rs.push_back(rec("air_0001", ErrorId::Contradiction, mode, true));
        rs.push_back(rec("air_0002", ErrorId::UnsupportedAction, mode, true));
        rs.push_back(rec("ret_0001", ErrorId::UnsupportedDomain, mode, true, Domain::RetailMini));
    }
    auto rows = context_counts(rs);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].domain == "airline");
    CHECK(rows[0].sessions == 2);
    CHECK(rows[0].seen == 2);
    CHECK(rows[0].unseen == 1);
    CHECK(rows[1].domain == "retail");
    CHECK(rows[1].total() == 1);
    CHECK(rows[2].domain == "total");
    CHECK(rows[2].sessions == 3);
    CHECK(rows[2].total() == 4);
}

TEST_CASE("agreement across runs") {
    // both runs share six keys; the extra record in run b is ignored
    std::vector<bool> pa{true, true, false, false, true, false};
    std::vector<bool> pb{true, false, false, false, true, true};
    std::vector<EpisodeRecord> a, b, c;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        a.push_back(rec("s" + std::to_string(i), ErrorId::Anaphora, "baseline", pa[i]));
        b.push_back(rec("s" + std::to_string(i), ErrorId::Anaphora, "baseline", pb[i]));
        c.push_back(rec("s" + std::to_string(i), ErrorId::Anaphora, "baseline", pa[i]));
    }
    b.push_back(rec("extra", ErrorId::Anaphora, "baseline", true));

    auto two = agreement({a, b});
    CHECK(two.items == 6);
    REQUIRE(two.pairs.size() == 1);
    CHECK(two.pairs[0].cohen_kappa == doctest::Approx(cohen_kappa(pa, pb)));
    CHECK(two.pairs[0].mcnemar_p == doctest::Approx(mcnemar(pa, pb)));
    CHECK_FALSE(two.fleiss_kappa);

    auto three = agreement({a, b, c});
    CHECK(three.pairs.size() == 3);
    REQUIRE(three.fleiss_kappa);
    CHECK(three.pairs[1].cohen_kappa == 1.0);  // a vs c
    auto text = agreement_text(three, {"r1", "r2", "r3"});
    CHECK(text.find("Fleiss kappa") != std::string::npos);
    CHECK(text.find("r3") != std::string::npos);

    CHECK(agreement({a}).pairs.empty());
    std::vector<EpisodeRecord> other{rec("zzz", ErrorId::Anaphora, "baseline", true)};
    CHECK_THROWS_AS(agreement({a, other}), MissingRecords);
}

TEST_CASE("load_run and write_summary") {
    fixtures::TempDir dir;
    CHECK_THROWS_AS(load_run(dir.path()), MissingRecords);
    std::filesystem::create_directories(dir.path() / "episodes");
    CHECK_THROWS_AS(load_run(dir.path()), MissingRecords);

    fixtures::MockReplay replay;
    auto ep = replay.run(fixtures::scenario("air_0001-anaphora"), RunMode{ModeKind::TargetedReIn, 2});
    save_episode(dir.path() / "episodes" / "b.jsonl", ep.record);
    auto base = replay.run(fixtures::scenario("air_0001-anaphora"), RunMode{});
    save_episode(dir.path() / "episodes" / "a.jsonl", base.record);

    auto loaded = load_run(dir.path());
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0] == base.record);
    CHECK(loaded[1] == ep.record);

    write_summary(dir.path());
    auto txt = read_text_file(dir.path() / "summary.txt");
    auto csv = read_text_file(dir.path() / "summary.csv");
    CHECK(txt.find("Pass@1") != std::string::npos);
    CHECK(csv.find("targeted") != std::string::npos);
    CHECK(txt.find("airline") != std::string::npos);
}
